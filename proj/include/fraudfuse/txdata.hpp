#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace fraudfuse::txdata {

struct TransactionRecord {
    int tag = 0;
    std::string from_address;
    std::string to_address;
    double value = 0.0;
    std::int64_t timestamp = 0;
};

enum class Direction : int { Incoming = 0, Outgoing = 1 };

// A raw record as seen from one of its two accounts.
struct DirectedRecord {
    TransactionRecord base;
    Direction in_out = Direction::Outgoing;
    // Position of `base` in the parsed input; the stable tie-breaker.
    std::size_t source_index = 0;
};

// Time differences of one record for n = 2..n_max; by_n[n - 2] is Delta T_n.
struct NgramDiffs {
    std::vector<std::int64_t> by_n;

    std::int64_t at(int n) const { return by_n.at(static_cast<std::size_t>(n - 2)); }
    int n_max() const { return static_cast<int>(by_n.size()) + 1; }
};

struct AccountBucket {
    std::string address;
    std::vector<DirectedRecord> records;  // ascending timestamp, stable
    std::vector<NgramDiffs> ngram_diffs;  // parallel to records once computed
    int label = 0;
};

// Sorted by address, which also fixes the node order of the graph.
using BucketMap = std::map<std::string, AccountBucket>;

enum class Format { Csv, Jsonl };

// Format from a file extension (".csv" / ".jsonl" / ".json"); throws
// ConfigError otherwise.
Format format_from_path(const std::string& path);

// CSV needs the header `tag,from_address,to_address,value,timestamp`; JSONL
// needs one object per line with the same keys. Throws ParseError carrying
// the 1-based data row and field on malformed input or a negative value.
std::vector<TransactionRecord> parse_records(std::istream& in, Format format);

// Every raw record lands in the sender's bucket as outgoing and in the
// receiver's as incoming (a self-transfer yields both in one bucket).
BucketMap bucket_accounts(const std::vector<TransactionRecord>& records);

// Fills bucket.ngram_diffs with Delta T_n = T_i - T_{i-(n-1)} for i >= n-1,
// else 0. Throws DataError if the records are not time-sorted.
void compute_ngram_diffs(AccountBucket& bucket, int n_max = 5);

// label = 1 iff any record of the bucket (either direction) has tag 1.
void assign_labels(BucketMap& buckets);

// bucket_accounts + compute_ngram_diffs + assign_labels.
BucketMap build_buckets(const std::vector<TransactionRecord>& records, int n_max = 5);

}  // namespace fraudfuse::txdata
