#include "fraudfuse/graphnet.hpp"

#include <cmath>
#include <set>

#include "fraudfuse/errors.hpp"
#include "fraudfuse/numcore/ops.hpp"
#include "fraudfuse/numcore/optim.hpp"

namespace fraudfuse::graphnet {

using nc::Tensor;

graph::Matrix raw_features(const txdata::BucketMap& buckets, const graph::AddressIndex& index) {
    graph::Matrix m = graph::Matrix::Zero(static_cast<Eigen::Index>(index.size()), kFeatureDim);
    for (const auto& [addr, b] : buckets) {
        if (!index.contains(addr)) continue;
        const auto row = static_cast<Eigen::Index>(index.at(addr));
        std::set<std::string> senders, receivers;
        double in_value = 0.0, out_value = 0.0;
        double diff_sum[4] = {0, 0, 0, 0};
        for (std::size_t i = 0; i < b.records.size(); ++i) {
            const auto& r = b.records[i];
            if (r.in_out == txdata::Direction::Incoming) {
                senders.insert(r.base.from_address);
                in_value += r.base.value;
            } else {
                receivers.insert(r.base.to_address);
                out_value += r.base.value;
            }
            if (i < b.ngram_diffs.size()) {
                const auto& d = b.ngram_diffs[i];
                for (int n = 2; n <= std::min(5, d.n_max()); ++n) diff_sum[n - 2] += static_cast<double>(d.at(n));
            }
        }
        const double count = static_cast<double>(b.records.size());
        m(row, 0) = std::log1p(static_cast<double>(senders.size()));
        m(row, 1) = std::log1p(static_cast<double>(receivers.size()));
        m(row, 2) = std::log1p(in_value);
        m(row, 3) = std::log1p(out_value);
        for (int k = 0; k < 4; ++k) m(row, 4 + k) = count > 0 ? std::log1p(diff_sum[k] / count) : 0.0;
        m(row, 8) = std::log1p(count);
    }
    return m;
}

void standardize_columns(graph::Matrix& m) {
    if (m.rows() == 0) return;
    const double n = static_cast<double>(m.rows());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double mu = m.col(c).sum() / n;
        const double var = (m.col(c).array() - mu).square().sum() / n;
        if (var <= 1e-24) {
            m.col(c).setZero();
        } else {
            m.col(c) = ((m.col(c).array() - mu) / std::sqrt(var)).matrix();
        }
    }
}

NodeFeatures initial_features(const txdata::BucketMap& buckets, const graph::AddressIndex& index) {
    NodeFeatures f;
    f.h0 = raw_features(buckets, index);
    standardize_columns(f.h0);
    return f;
}

Tensor to_tensor(const graph::Matrix& m) {
    return Tensor::from(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
                        std::vector<double>(m.data(), m.data() + m.size()));
}

void GcnConfig::validate() const {
    if (d_in == 0 || d_hidden == 0 || d_out == 0 || n_layers == 0) throw ConfigError("GCN sizes must be positive");
}

GcnStack::GcnStack(const GcnConfig& cfg, nc::ParameterStore& store, nc::Rng& rng, const std::string& prefix)
    : final_relu_(cfg.final_relu) {
    cfg.validate();
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::size_t in = l == 0 ? cfg.d_in : cfg.d_hidden;
        const std::size_t out = l + 1 == cfg.n_layers ? cfg.d_out : cfg.d_hidden;
        Tensor& w = store.add(prefix + ".w" + std::to_string(l), in, out);
        nc::xavier_uniform(w, rng);
        weights_.push_back(w);
    }
}

GcnStack::GcnStack(std::vector<Tensor> weights, bool final_relu) : weights_(std::move(weights)), final_relu_(final_relu) {
    if (weights_.empty()) throw ConfigError("GCN needs at least one layer");
    for (std::size_t l = 1; l < weights_.size(); ++l) {
        if (weights_[l - 1].cols() != weights_[l].rows()) {
            throw ShapeError("GCN layer " + std::to_string(l) + ": " + weights_[l - 1].shape_str() + " does not chain into " +
                             weights_[l].shape_str());
        }
    }
}

Tensor GcnStack::layer(const Tensor& a, const Tensor& h, const Tensor& w, bool activate) const {
    // Multiply in the cheaper order; both give A H W.
    const Tensor z = w.rows() <= w.cols() ? nc::matmul(nc::matmul(a, h), w) : nc::matmul(a, nc::matmul(h, w));
    return activate ? nc::relu(z) : z;
}

Tensor GcnStack::forward(const Tensor& h0, const Tensor& a_hat) const {
    if (a_hat.rows() != a_hat.cols() || a_hat.rows() != h0.rows()) {
        throw ShapeError("gcn_forward: A_hat " + a_hat.shape_str() + " does not match features " + h0.shape_str());
    }
    Tensor h = h0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = layer(a_hat, h, weights_[l], l + 1 < weights_.size() || final_relu_);
    }
    return h;
}

Tensor GcnStack::forward_rows(const Tensor& h0, const Tensor& a_hat, const std::vector<std::size_t>& rows) const {
    if (a_hat.rows() != a_hat.cols() || a_hat.rows() != h0.rows()) {
        throw ShapeError("gcn_forward: A_hat " + a_hat.shape_str() + " does not match features " + h0.shape_str());
    }
    Tensor h = h0;
    for (std::size_t l = 0; l + 1 < weights_.size(); ++l) h = layer(a_hat, h, weights_[l], true);
    const Tensor a_rows = nc::embedding_lookup(a_hat, rows);
    return layer(a_rows, h, weights_.back(), final_relu_);
}

Tensor node_embedding(const std::string& address, const Tensor& embeddings, const graph::AddressIndex& index) {
    if (!index.contains(address)) throw DataError("no node embedding for unknown address " + address);
    const std::size_t row = index.at(address);
    if (row >= embeddings.rows()) throw ShapeError("node_embedding: index out of range for " + embeddings.shape_str());
    return nc::slice_rows(embeddings, row, 1);
}

}  // namespace fraudfuse::graphnet
