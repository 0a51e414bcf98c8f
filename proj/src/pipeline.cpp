#include "fraudfuse/pipeline.hpp"

#include "fraudfuse/errors.hpp"

namespace fraudfuse::pipeline {

fusion::GraphInputs Dataset::graph_inputs() const {
    return {graphnet::to_tensor(normalized.a_hat), graphnet::to_tensor(features.h0)};
}

Dataset build_dataset(std::vector<txdata::TransactionRecord> records, const graph::GraphBuildConfig& cfg, int n_max) {
    Dataset ds;
    ds.records = std::move(records);
    ds.buckets = txdata::build_buckets(ds.records, n_max);
    ds.index = graph::AddressIndex::from_buckets(ds.buckets);
    ds.graph = graph::build_adjacency(ds.records, ds.buckets, ds.index, cfg);
    ds.normalized = graph::normalize(ds.graph, cfg);
    ds.features = graphnet::initial_features(ds.buckets, ds.index);
    return ds;
}

std::vector<corpus::AccountDocument> render_all(const txdata::BucketMap& buckets, std::uint64_t seed) {
    std::vector<corpus::AccountDocument> docs;
    docs.reserve(buckets.size());
    for (const auto& [addr, b] : buckets) docs.push_back(corpus::render_document(b, seed));
    return docs;
}

EncodedDocs encode(const std::vector<corpus::AccountDocument>& docs, const graph::AddressIndex& index,
                   std::size_t max_len) {
    static const corpus::Vocabulary vocab;
    EncodedDocs out;
    out.seqs.reserve(docs.size());
    for (const auto& d : docs) {
        if (d.address.empty()) throw DataError("document has no account address; missing .accounts sidecar?");
        out.rows.push_back(index.at(d.address));
        out.seqs.push_back(corpus::tokenize(d, vocab, max_len));
        out.labels.push_back(d.label);
        out.addresses.push_back(d.address);
    }
    return out;
}

}  // namespace fraudfuse::pipeline
