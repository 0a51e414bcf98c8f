#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fraudfuse/txdata.hpp"

namespace fraudfuse::corpus {

struct AccountDocument {
    std::string address;  // never part of `text`
    std::string text;
    int label = 0;

    bool operator==(const AccountDocument&) const = default;
};

struct CorpusSplit {
    std::vector<AccountDocument> train;
    std::vector<AccountDocument> dev;
    std::vector<AccountDocument> test;
    std::uint64_t seed = 0;
};

// One line per account: records in a seeded random order, each rendered as
//   Value= <v:.8f>, in_out= <0|1>, ngram2= <d2>, ..., ngramN= <dN>
// with `tag= <label>, ` in front of the first one only, joined by "; ".
// Addresses and timestamps never appear. An empty bucket renders "".
AccountDocument render_document(const txdata::AccountBucket& bucket, std::uint64_t seed);

// Same as render_document with an explicit record order (a permutation of
// the bucket's record indices).
AccountDocument render_document_in_order(const txdata::AccountBucket& bucket,
                                         const std::vector<std::size_t>& order);

// Permutation used by render_document for a given seed and bucket.
std::vector<std::size_t> record_order(const txdata::AccountBucket& bucket, std::uint64_t seed);

// Stratified by label. Split sizes follow the ratios by largest remainder,
// and each split's fraud count is apportioned the same way, so every split's
// fraud fraction is within 1/|split| of the global one. Throws DataError with
// fewer than 10 documents and ConfigError when ratios do not sum to 1.
CorpusSplit split_corpus(const std::vector<AccountDocument>& docs,
                         std::array<double, 3> ratios = {0.8, 0.1, 0.1}, std::uint64_t seed = 0);

// Fixed closed vocabulary.
class Vocabulary {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;
    static constexpr std::size_t kCls = 2;
    static constexpr std::size_t kSep = 3;

    Vocabulary();
    std::size_t size() const { return tokens_.size(); }
    std::size_t id(std::string_view token) const;  // kUnk if absent
    const std::string& token(std::size_t id) const { return tokens_.at(id); }
    bool is_special(std::size_t id) const { return id <= kSep; }

private:
    std::vector<std::string> tokens_;
};

struct TokenSequence {
    std::vector<std::size_t> ids;       // always max_len long
    std::vector<std::size_t> type_ids;  // all zero
    std::size_t length = 0;             // non-pad tokens incl. [CLS]/[SEP]
    int label = 0;

    std::vector<bool> attention_mask() const;
};

// Words ([A-Za-z_][A-Za-z0-9_]*) map to field tokens or [UNK]; digit runs are
// emitted digit by digit; punctuation characters are their own tokens;
// whitespace separates. Wrapped in [CLS] ... [SEP], content truncated so the
// total fits max_len, then right-padded with [PAD].
TokenSequence tokenize(const AccountDocument& doc, const Vocabulary& vocab, std::size_t max_len = 128);

// Content tokens concatenated without separators.
std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab);

// `label<TAB>text\n`, no header.
void write_tsv(const std::filesystem::path& path, const std::vector<AccountDocument>& docs);
// Throws DataError with the 1-based line number on a malformed line. When a
// seed is given the documents are shuffled after reading.
std::vector<AccountDocument> read_tsv(const std::filesystem::path& path,
                                      std::optional<std::uint64_t> shuffle_seed = std::nullopt);

// Split files: Train.tsv, dev.tsv, test.tsv, plus address sidecars
// (Train.accounts, ...) holding one address per line in the same order.
void write_split(const std::filesystem::path& dir, const CorpusSplit& split);
CorpusSplit read_split(const std::filesystem::path& dir,
                       std::optional<std::uint64_t> shuffle_seed = std::nullopt);

}  // namespace fraudfuse::corpus
