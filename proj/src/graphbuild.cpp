#include "fraudfuse/graphbuild.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "fraudfuse/errors.hpp"

namespace fraudfuse::graph {

AddressIndex::AddressIndex(std::vector<std::string> addresses) : addresses_(std::move(addresses)) {
    std::sort(addresses_.begin(), addresses_.end());
    addresses_.erase(std::unique(addresses_.begin(), addresses_.end()), addresses_.end());
    for (std::size_t i = 0; i < addresses_.size(); ++i) lookup_.emplace(addresses_[i], i);
}

AddressIndex AddressIndex::from_buckets(const txdata::BucketMap& buckets) {
    std::vector<std::string> addrs;
    addrs.reserve(buckets.size());
    for (const auto& [addr, b] : buckets) addrs.push_back(addr);
    return AddressIndex(std::move(addrs));
}

std::size_t AddressIndex::at(const std::string& address) const {
    const auto it = lookup_.find(address);
    if (it == lookup_.end()) throw DataError("address not in index: " + address);
    return it->second;
}

void GraphBuildConfig::validate() const {
    bool any_positive = false;
    for (double a : alpha) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("alpha coefficients must be finite and >= 0");
        any_positive = any_positive || a > 0.0;
    }
    if (!any_positive) throw ConfigError("at least one alpha coefficient must be > 0");
}

double edge_weight(double value, const txdata::NgramDiffs& diffs, const GraphBuildConfig& cfg) {
    double acc = 0.0;
    const int top = std::min(5, diffs.n_max());
    for (int n = 2; n <= top; ++n) {
        const double a = cfg.alpha[static_cast<std::size_t>(n - 2)];
        const double dt = static_cast<double>(diffs.at(n));
        acc += cfg.time_transform == TimeTransform::Linear ? a * dt : a / (1.0 + dt);
    }
    return value * acc;
}

WeightedGraph build_adjacency(const std::vector<txdata::TransactionRecord>& records,
                              const txdata::BucketMap& buckets, const AddressIndex& index,
                              const GraphBuildConfig& cfg) {
    cfg.validate();
    // Outgoing copy of each raw record -> its diffs in the sender's bucket.
    std::vector<const txdata::NgramDiffs*> diffs_of(records.size(), nullptr);
    for (const auto& [addr, b] : buckets) {
        if (b.ngram_diffs.size() != b.records.size()) {
            throw DataError("bucket " + addr + " has no n-gram diffs; run compute_ngram_diffs first");
        }
        for (std::size_t i = 0; i < b.records.size(); ++i) {
            const auto& r = b.records[i];
            if (r.in_out == txdata::Direction::Outgoing && r.source_index < records.size()) {
                diffs_of[r.source_index] = &b.ngram_diffs[i];
            }
        }
    }

    WeightedGraph g;
    g.index = index;
    g.adjacency = Matrix::Zero(static_cast<Eigen::Index>(index.size()),
                               static_cast<Eigen::Index>(index.size()));
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& r = records[k];
        const auto from = static_cast<Eigen::Index>(index.at(r.from_address));
        const auto to = static_cast<Eigen::Index>(index.at(r.to_address));
        if (!diffs_of[k]) throw DataError("record " + std::to_string(k) + " missing from sender bucket");
        g.adjacency(from, to) += edge_weight(r.value, *diffs_of[k], cfg);
    }
    return g;
}

NormalizedGraph normalize(const WeightedGraph& graph, const GraphBuildConfig& cfg) {
    const Matrix& a = graph.adjacency;
    if (!a.allFinite()) throw NumericError("adjacency contains non-finite entries");
    NormalizedGraph out;
    out.symmetrized = cfg.symmetrize;
    Matrix tilde = cfg.symmetrize ? Matrix(0.5 * (a + a.transpose())) : a;
    tilde.diagonal().array() += 1.0;
    const Eigen::VectorXd inv_sqrt_deg = tilde.rowwise().sum().array().rsqrt();
    out.a_hat = inv_sqrt_deg.asDiagonal() * tilde * inv_sqrt_deg.asDiagonal();
    return out;
}

static_assert(std::endian::native == std::endian::little, "matrix dump assumes little-endian");

void write_matrix_dump(const std::filesystem::path& path, const Matrix& m) {
    if (m.rows() != m.cols()) throw DataError("matrix dump expects a square matrix");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    const std::uint32_t n = static_cast<std::uint32_t>(m.rows());
    const std::uint64_t reserved = 0;
    out.write("CFGR", 4);
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&reserved), 8);
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!out) throw DataError("write failed: " + path.string());
}

Matrix read_matrix_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char header[16];
    in.read(header, 16);
    if (!in || std::memcmp(header, "CFGR", 4) != 0) throw DataError("not a CFGR matrix dump: " + path.string());
    std::uint32_t n = 0;
    std::memcpy(&n, header + 4, 4);
    Matrix m(n, n);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw DataError("truncated matrix dump: " + path.string());
    return m;
}

void write_index_sidecar(const std::filesystem::path& path, const AddressIndex& index) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << nlohmann::json{{"n", index.size()}, {"addresses", index.addresses()}}.dump(1) << "\n";
}

AddressIndex read_index_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        return AddressIndex(j.at("addresses").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad index sidecar " + path.string() + ": " + e.what());
    }
}

}  // namespace fraudfuse::graph
