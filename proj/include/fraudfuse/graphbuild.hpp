#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fraudfuse/txdata.hpp"

namespace fraudfuse::graph {

// Bijection address <-> [0, n), assigned in lexicographic address order.
class AddressIndex {
public:
    AddressIndex() = default;
    explicit AddressIndex(std::vector<std::string> addresses);
    static AddressIndex from_buckets(const txdata::BucketMap& buckets);

    std::size_t size() const { return addresses_.size(); }
    // Throws DataError naming the address when it is unknown.
    std::size_t at(const std::string& address) const;
    bool contains(const std::string& address) const { return lookup_.count(address) != 0; }
    const std::string& address(std::size_t i) const { return addresses_.at(i); }
    const std::vector<std::string>& addresses() const { return addresses_; }

private:
    std::vector<std::string> addresses_;
    std::map<std::string, std::size_t> lookup_;
};

enum class TimeTransform { Linear, Inverse };

struct GraphBuildConfig {
    // alpha[n - 2] weights Delta T_n, n = 2..5.
    std::array<double, 4> alpha{1.0, 1.0, 1.0, 1.0};
    TimeTransform time_transform = TimeTransform::Linear;
    bool symmetrize = true;

    void validate() const;
};

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct WeightedGraph {
    AddressIndex index;
    Matrix adjacency;  // row = sender, column = receiver
};

struct NormalizedGraph {
    Matrix a_hat;
    bool symmetrized = false;
};

// linear:  value * sum_n alpha_n * dT_n
// inverse: value * sum_n alpha_n / (1 + dT_n)
// Only n in 2..5 with a configured alpha contribute.
double edge_weight(double value, const txdata::NgramDiffs& diffs, const GraphBuildConfig& cfg);

// A[from, to] += w_k for every record, where w_k uses the n-gram diffs of
// the record's outgoing copy in the sender's bucket.
WeightedGraph build_adjacency(const std::vector<txdata::TransactionRecord>& records,
                              const txdata::BucketMap& buckets, const AddressIndex& index,
                              const GraphBuildConfig& cfg);

// Optionally (A + A^T)/2, then A~ = A + I, D~ = diag(row sums of A~),
// A_hat = D~^-1/2 A~ D~^-1/2. Throws NumericError on non-finite input.
NormalizedGraph normalize(const WeightedGraph& graph, const GraphBuildConfig& cfg);

// Dump: 16-byte header (magic "CFGR", u32 n, 8 reserved zero bytes), then n*n
// row-major float64 LE. The index goes to a JSON sidecar
// {"n": n, "addresses": [...]} whose position is the matrix index.
void write_matrix_dump(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_dump(const std::filesystem::path& path);
void write_index_sidecar(const std::filesystem::path& path, const AddressIndex& index);
AddressIndex read_index_sidecar(const std::filesystem::path& path);

}  // namespace fraudfuse::graph
