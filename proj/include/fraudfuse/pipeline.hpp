#pragma once

#include <cstdint>
#include <vector>

#include "fraudfuse/corpusgen.hpp"
#include "fraudfuse/fusion.hpp"
#include "fraudfuse/graphbuild.hpp"
#include "fraudfuse/graphnet.hpp"
#include "fraudfuse/txdata.hpp"

namespace fraudfuse::pipeline {

// Everything derived deterministically from a transaction list.
struct Dataset {
    std::vector<txdata::TransactionRecord> records;
    txdata::BucketMap buckets;
    graph::AddressIndex index;
    graph::WeightedGraph graph;
    graph::NormalizedGraph normalized;
    graphnet::NodeFeatures features;

    fusion::GraphInputs graph_inputs() const;
};

Dataset build_dataset(std::vector<txdata::TransactionRecord> records, const graph::GraphBuildConfig& cfg = {},
                      int n_max = 5);

// One document per bucket, in address order.
std::vector<corpus::AccountDocument> render_all(const txdata::BucketMap& buckets, std::uint64_t seed);

// Token sequences aligned with their graph rows and labels.
struct EncodedDocs {
    std::vector<corpus::TokenSequence> seqs;
    std::vector<std::size_t> rows;
    std::vector<int> labels;
    std::vector<std::string> addresses;

    std::size_t size() const { return seqs.size(); }
};

// Throws DataError when a document's address is not a graph node.
EncodedDocs encode(const std::vector<corpus::AccountDocument>& docs, const graph::AddressIndex& index,
                   std::size_t max_len);

}  // namespace fraudfuse::pipeline
