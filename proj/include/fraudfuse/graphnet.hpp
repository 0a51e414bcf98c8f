#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fraudfuse/graphbuild.hpp"
#include "fraudfuse/numcore/random.hpp"
#include "fraudfuse/numcore/tensor.hpp"
#include "fraudfuse/txdata.hpp"

namespace fraudfuse::graphnet {

inline constexpr std::size_t kFeatureDim = 9;

struct NodeFeatures {
    graph::Matrix h0;  // n x kFeatureDim, rows in AddressIndex order
    std::string recipe = "log1p-activity-v1";
};

// Per account, before standardization:
//   0 log1p(distinct senders)          1 log1p(distinct receivers)
//   2 log1p(total incoming value)      3 log1p(total outgoing value)
//   4..7 log1p(mean dT_2 .. dT_5)      8 log1p(record count)
// Each column is then shifted to zero mean and scaled to unit (population)
// variance; constant columns become 0.
graph::Matrix raw_features(const txdata::BucketMap& buckets, const graph::AddressIndex& index);
NodeFeatures initial_features(const txdata::BucketMap& buckets, const graph::AddressIndex& index);
void standardize_columns(graph::Matrix& m);

// Copies an Eigen matrix into a constant tensor.
nc::Tensor to_tensor(const graph::Matrix& m);

struct GcnConfig {
    std::size_t d_in = kFeatureDim;
    std::size_t d_hidden = 64;
    std::size_t d_out = 64;
    std::size_t n_layers = 2;
    bool final_relu = true;

    void validate() const;
};

class GcnStack {
public:
    GcnStack(const GcnConfig& cfg, nc::ParameterStore& store, nc::Rng& init_rng, const std::string& prefix = "gcn");
    // From explicit weight tensors (d_in x d_h, ..., d_h x d_out).
    GcnStack(std::vector<nc::Tensor> weights, bool final_relu);

    // H_{l+1} = relu(A_hat H_l W_l) for every layer; the last relu is
    // optional. Returns n x d_out.
    nc::Tensor forward(const nc::Tensor& h0, const nc::Tensor& a_hat) const;

    // Same values as forward(...) restricted to `rows`, computing only those
    // rows in the last layer.
    nc::Tensor forward_rows(const nc::Tensor& h0, const nc::Tensor& a_hat, const std::vector<std::size_t>& rows) const;

    const std::vector<nc::Tensor>& weights() const { return weights_; }

private:
    nc::Tensor layer(const nc::Tensor& a, const nc::Tensor& h, const nc::Tensor& w, bool activate) const;

    std::vector<nc::Tensor> weights_;
    bool final_relu_ = true;
};

// Row of `embeddings` for `address`; throws DataError for an unknown address.
nc::Tensor node_embedding(const std::string& address, const nc::Tensor& embeddings, const graph::AddressIndex& index);

}  // namespace fraudfuse::graphnet
