#include "fraudfuse/corpusgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "fraudfuse/errors.hpp"
#include "fraudfuse/numcore/random.hpp"

namespace fraudfuse::corpus {

namespace {

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.8f", v);
    return buf;
}

std::string render_record(const txdata::AccountBucket& bucket, std::size_t i, bool with_tag) {
    const auto& r = bucket.records[i];
    std::string s;
    if (with_tag) s += "tag= " + std::to_string(bucket.label) + ", ";
    s += "Value= " + format_value(r.base.value);
    s += ", in_out= " + std::to_string(static_cast<int>(r.in_out));
    if (i < bucket.ngram_diffs.size()) {
        const auto& d = bucket.ngram_diffs[i];
        for (int n = 2; n <= d.n_max(); ++n) {
            s += ", ngram" + std::to_string(n) + "= " + std::to_string(d.at(n));
        }
    }
    return s;
}

// Largest-remainder apportionment of `total` over `weights` (which sum to 1).
std::array<std::size_t, 3> apportion(std::size_t total, const std::array<double, 3>& weights) {
    std::array<std::size_t, 3> out{};
    std::array<double, 3> rem{};
    std::size_t used = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double exact = weights[k] * static_cast<double>(total);
        out[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rem[k] = exact - static_cast<double>(out[k]);
        used += out[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; used < total; ++k) {
        if (weights[order[k % 3]] <= 0.0) continue;
        ++out[order[k % 3]];
        ++used;
    }
    return out;
}

const char* kSplitNames[3] = {"Train", "dev", "test"};

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

}  // namespace

std::vector<std::size_t> record_order(const txdata::AccountBucket& bucket, std::uint64_t seed) {
    std::vector<std::size_t> order(bucket.records.size());
    std::iota(order.begin(), order.end(), 0);
    nc::Rng rng(seed, "render:" + bucket.address);
    rng.shuffle(std::span<std::size_t>(order));
    return order;
}

AccountDocument render_document_in_order(const txdata::AccountBucket& bucket,
                                         const std::vector<std::size_t>& order) {
    AccountDocument doc;
    doc.address = bucket.address;
    doc.label = bucket.label;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k > 0) doc.text += "; ";
        doc.text += render_record(bucket, order[k], k == 0);
    }
    return doc;
}

AccountDocument render_document(const txdata::AccountBucket& bucket, std::uint64_t seed) {
    return render_document_in_order(bucket, record_order(bucket, seed));
}

CorpusSplit split_corpus(const std::vector<AccountDocument>& docs, std::array<double, 3> ratios,
                         std::uint64_t seed) {
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    if (docs.size() < 10) {
        throw DataError("need at least 10 documents to split, got " + std::to_string(docs.size()));
    }

    std::vector<std::size_t> fraud, normal;
    for (std::size_t i = 0; i < docs.size(); ++i) (docs[i].label == 1 ? fraud : normal).push_back(i);
    nc::Rng rng(seed, "split");
    rng.shuffle(std::span<std::size_t>(fraud));
    rng.shuffle(std::span<std::size_t>(normal));

    const auto sizes = apportion(docs.size(), ratios);
    std::array<double, 3> share{};
    for (std::size_t k = 0; k < 3; ++k) share[k] = static_cast<double>(sizes[k]) / static_cast<double>(docs.size());
    auto fraud_counts = apportion(fraud.size(), share);
    // Keep each split feasible: never more fraud than the split holds, and
    // never more normals than are left.
    for (int pass = 0; pass < 3; ++pass) {
        for (std::size_t k = 0; k < 3; ++k) {
            while (fraud_counts[k] > sizes[k]) {
                --fraud_counts[k];
                for (std::size_t j = 0; j < 3; ++j) {
                    if (fraud_counts[j] < sizes[j] && j != k) {
                        ++fraud_counts[j];
                        break;
                    }
                }
            }
        }
    }

    CorpusSplit out;
    out.seed = seed;
    std::vector<AccountDocument>* parts[3] = {&out.train, &out.dev, &out.test};
    std::size_t fi = 0, ni = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<std::size_t> members;
        for (std::size_t c = 0; c < fraud_counts[k]; ++c) members.push_back(fraud[fi++]);
        for (std::size_t c = fraud_counts[k]; c < sizes[k]; ++c) members.push_back(normal[ni++]);
        rng.shuffle(std::span<std::size_t>(members));
        for (std::size_t m : members) parts[k]->push_back(docs[m]);
    }
    return out;
}

Vocabulary::Vocabulary()
    : tokens_{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "tag",    "Value",  "in_out", "ngram2", "ngram3",
              "ngram4", "ngram5", "=",     ",",     ".",     ":",      ";",      "0",      "1",
              "2",      "3",      "4",     "5",     "6",     "7",      "8",      "9"} {}

std::size_t Vocabulary::id(std::string_view token) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i] == token) return i;
    }
    return kUnk;
}

std::vector<bool> TokenSequence::attention_mask() const {
    std::vector<bool> mask(ids.size(), false);
    for (std::size_t i = 0; i < length && i < ids.size(); ++i) mask[i] = true;
    return mask;
}

TokenSequence tokenize(const AccountDocument& doc, const Vocabulary& vocab, std::size_t max_len) {
    if (max_len < 2) throw ConfigError("max_len must be at least 2");
    std::vector<std::size_t> content;
    const std::string& s = doc.text;
    std::size_t i = 0;
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            content.push_back(vocab.id(std::string_view(&s[i], 1)));
            ++i;
        } else if (is_word(c)) {
            std::size_t j = i;
            while (j < s.size() && is_word(s[j])) ++j;
            content.push_back(vocab.id(std::string_view(s).substr(i, j - i)));
            i = j;
        } else {
            content.push_back(vocab.id(std::string_view(&s[i], 1)));
            ++i;
        }
    }
    // [CLS] + content must leave room for [SEP].
    if (content.size() > max_len - 2) content.resize(max_len - 2);

    TokenSequence seq;
    seq.label = doc.label;
    seq.ids.reserve(max_len);
    seq.ids.push_back(Vocabulary::kCls);
    seq.ids.insert(seq.ids.end(), content.begin(), content.end());
    seq.ids.push_back(Vocabulary::kSep);
    seq.length = seq.ids.size();
    seq.ids.resize(max_len, Vocabulary::kPad);
    seq.type_ids.assign(max_len, 0);
    return seq;
}

std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < seq.length; ++i) {
        if (vocab.is_special(seq.ids[i])) continue;
        out += vocab.token(seq.ids[i]);
    }
    return out;
}

void write_tsv(const std::filesystem::path& path, const std::vector<AccountDocument>& docs) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& d : docs) {
        if (d.text.find_first_of("\t\n") != std::string::npos) {
            throw DataError("document for " + d.address + " contains a tab or newline");
        }
        out << d.label << '\t' << d.text << '\n';
    }
}

std::vector<AccountDocument> read_tsv(const std::filesystem::path& path,
                                      std::optional<std::uint64_t> shuffle_seed) {
    const auto lines = read_lines(path);
    std::vector<AccountDocument> docs;
    docs.reserve(lines.size());
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const std::string& line = lines[n];
        const auto tab = line.find('\t');
        const std::string where = path.string() + ":" + std::to_string(n + 1);
        if (tab == std::string::npos) throw DataError(where + ": expected label<TAB>text");
        if (line.find('\t', tab + 1) != std::string::npos) throw DataError(where + ": expected 2 columns, found more");
        const std::string label = line.substr(0, tab);
        if (label != "0" && label != "1") throw DataError(where + ": label must be 0 or 1");
        AccountDocument d;
        d.label = label == "1" ? 1 : 0;
        d.text = line.substr(tab + 1);
        docs.push_back(std::move(d));
    }
    if (shuffle_seed) {
        nc::Rng rng(*shuffle_seed, "tsv");
        rng.shuffle(std::span<AccountDocument>(docs));
    }
    return docs;
}

void write_split(const std::filesystem::path& dir, const CorpusSplit& split) {
    std::filesystem::create_directories(dir);
    const std::vector<AccountDocument>* parts[3] = {&split.train, &split.dev, &split.test};
    for (std::size_t k = 0; k < 3; ++k) {
        write_tsv(dir / (std::string(kSplitNames[k]) + ".tsv"), *parts[k]);
        std::ofstream acc(dir / (std::string(kSplitNames[k]) + ".accounts"), std::ios::trunc);
        if (!acc) throw DataError("cannot write account sidecar in " + dir.string());
        for (const auto& d : *parts[k]) acc << d.address << '\n';
    }
}

CorpusSplit read_split(const std::filesystem::path& dir, std::optional<std::uint64_t> shuffle_seed) {
    CorpusSplit split;
    std::vector<AccountDocument>* parts[3] = {&split.train, &split.dev, &split.test};
    for (std::size_t k = 0; k < 3; ++k) {
        auto docs = read_tsv(dir / (std::string(kSplitNames[k]) + ".tsv"));
        const auto acc_path = dir / (std::string(kSplitNames[k]) + ".accounts");
        if (std::filesystem::exists(acc_path)) {
            const auto addrs = read_lines(acc_path);
            if (addrs.size() != docs.size()) {
                throw DataError(acc_path.string() + " has " + std::to_string(addrs.size()) + " lines, expected " +
                                std::to_string(docs.size()));
            }
            for (std::size_t i = 0; i < docs.size(); ++i) docs[i].address = addrs[i];
        }
        if (shuffle_seed) {
            nc::Rng rng(*shuffle_seed, std::string("tsv:") + kSplitNames[k]);
            rng.shuffle(std::span<AccountDocument>(docs));
        }
        *parts[k] = std::move(docs);
    }
    return split;
}

}  // namespace fraudfuse::corpus
