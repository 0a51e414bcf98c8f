#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "fraudfuse/corpusgen.hpp"
#include "fraudfuse/errors.hpp"
#include "fraudfuse/numcore/random.hpp"

using namespace fraudfuse;
using namespace fraudfuse::corpus;
using txdata::TransactionRecord;

namespace {

std::vector<std::string> split_records(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto p = text.find("; ", start);
        out.push_back(text.substr(start, p == std::string::npos ? std::string::npos : p - start));
        if (p == std::string::npos) break;
        start = p + 2;
    }
    return out;
}

std::string strip_tag(std::string s) {
    if (s.rfind("tag= ", 0) == 0) s = s.substr(s.find(", ") + 2);
    return s;
}

std::vector<AccountDocument> make_docs(std::size_t n, std::size_t fraud) {
    std::vector<AccountDocument> docs;
    for (std::size_t i = 0; i < n; ++i) {
        docs.push_back({"acct" + std::to_string(i), "Value= " + std::to_string(i), i < fraud ? 1 : 0});
    }
    return docs;
}

std::size_t count_fraud(const std::vector<AccountDocument>& d) {
    return static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [](auto& x) { return x.label == 1; }));
}

std::vector<std::string> token_names(const TokenSequence& s, const Vocabulary& v) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < s.length; ++i) out.push_back(v.token(s.ids[i]));
    return out;
}

txdata::BucketMap random_buckets(nc::Rng& rng, std::size_t records, std::size_t accounts) {
    std::vector<TransactionRecord> recs;
    for (std::size_t i = 0; i < records; ++i) {
        char addr_from[48], addr_to[48];
        std::snprintf(addr_from, sizeof addr_from, "0x%040llx", static_cast<unsigned long long>(rng.below(accounts)));
        std::snprintf(addr_to, sizeof addr_to, "0x%040llx", static_cast<unsigned long long>(rng.below(accounts)));
        recs.push_back({rng.uniform() < 0.3 ? 1 : 0, addr_from, addr_to, rng.uniform(0, 20),
                        1600000000 + static_cast<std::int64_t>(rng.below(100000))});
    }
    return txdata::build_buckets(recs);
}

}  // namespace

TEST(Render, OneRecordFraudAccount) {
    const auto buckets = txdata::build_buckets({{1, "0xA", "0xB", 5.06854256, 1600000000}});
    const auto doc = render_document(buckets.at("0xA"), 1);
    EXPECT_EQ(doc.text, "tag= 1, Value= 5.06854256, in_out= 1, ngram2= 0, ngram3= 0, ngram4= 0, ngram5= 0");
    EXPECT_EQ(doc.label, 1);
    EXPECT_EQ(doc.address, "0xA");
}

TEST(Render, EmptyBucketKeepsLabelOnly) {
    txdata::AccountBucket b;
    b.address = "0xE";
    const auto doc = render_document(b, 3);
    EXPECT_EQ(doc.text, "");
    EXPECT_EQ(doc.label, 0);
}

TEST(Render, IdentityOrderPreserved) {
    const auto buckets = txdata::build_buckets(
        {{0, "A", "B", 1.0, 10}, {0, "A", "C", 2.0, 20}, {0, "A", "D", 3.0, 30}});
    const auto& a = buckets.at("A");
    const auto doc = render_document_in_order(a, {0, 1, 2});
    const auto parts = split_records(doc.text);
    ASSERT_EQ(parts.size(), 3u);
    EXPECT_NE(parts[0].find("Value= 1.00000000"), std::string::npos);
    EXPECT_NE(parts[1].find("Value= 2.00000000"), std::string::npos);
    EXPECT_NE(parts[2].find("Value= 3.00000000"), std::string::npos);
    // A seed whose shuffle happens to be the identity gives the same text.
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        if (record_order(a, seed) == std::vector<std::size_t>{0, 1, 2}) {
            EXPECT_EQ(render_document(a, seed).text, doc.text);
            return;
        }
    }
    FAIL() << "no identity seed among the first 100";
}

TEST(Render, ShuffleKeepsRecordMultiset) {
    const auto buckets = txdata::build_buckets(
        {{0, "A", "B", 1.0, 10}, {1, "C", "A", 2.0, 20}, {0, "A", "D", 3.0, 30}});
    const auto& a = buckets.at("A");
    std::multiset<std::string> reference;
    for (const auto& p : split_records(render_document_in_order(a, {0, 1, 2}).text)) reference.insert(strip_tag(p));
    std::set<std::vector<std::size_t>> orders;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto order = record_order(a, seed);
        auto sorted = order;
        std::sort(sorted.begin(), sorted.end());
        ASSERT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2}));
        orders.insert(order);
        std::multiset<std::string> got;
        const auto parts = split_records(render_document(a, seed).text);
        for (const auto& p : parts) got.insert(strip_tag(p));
        ASSERT_EQ(got, reference);
        ASSERT_EQ(parts[0].rfind("tag= 1, ", 0), 0u);
    }
    EXPECT_GT(orders.size(), 1u);
}

TEST(Render, NoAddressOrTimestampAndOneTag) {
    nc::Rng rng(21);
    const auto buckets = random_buckets(rng, 200, 30);
    for (const auto& [addr, b] : buckets) {
        const auto doc = render_document(b, 9);
        for (const auto& [other, ob] : buckets) ASSERT_EQ(doc.text.find(other), std::string::npos);
        for (const auto& r : b.records) {
            ASSERT_EQ(doc.text.find(std::to_string(r.base.timestamp)), std::string::npos);
        }
        std::size_t tags = 0;
        for (auto p = doc.text.find("tag="); p != std::string::npos; p = doc.text.find("tag=", p + 1)) ++tags;
        ASSERT_EQ(tags, b.records.empty() ? 0u : 1u);
    }
}

TEST(Split, StratifiedCounts) {
    const auto s = split_corpus(make_docs(100, 50), {0.8, 0.1, 0.1}, 5);
    EXPECT_EQ(s.train.size(), 80u);
    EXPECT_EQ(s.dev.size(), 10u);
    EXPECT_EQ(s.test.size(), 10u);
    EXPECT_EQ(count_fraud(s.train), 40u);
    EXPECT_EQ(count_fraud(s.dev), 5u);
    EXPECT_EQ(count_fraud(s.test), 5u);
}

TEST(Split, DegenerateRatioPutsAllInTrain) {
    const auto s = split_corpus(make_docs(20, 3), {1.0, 0.0, 0.0}, 5);
    EXPECT_EQ(s.train.size(), 20u);
    EXPECT_TRUE(s.dev.empty());
    EXPECT_TRUE(s.test.empty());
}

TEST(Split, Deterministic) {
    const auto docs = make_docs(57, 13);
    const auto a = split_corpus(docs, {0.8, 0.1, 0.1}, 9);
    const auto b = split_corpus(docs, {0.8, 0.1, 0.1}, 9);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.dev, b.dev);
    EXPECT_EQ(a.test, b.test);
}

TEST(Split, Errors) {
    EXPECT_THROW(split_corpus(make_docs(9, 3)), DataError);
    EXPECT_THROW(split_corpus(make_docs(20, 3), {0.5, 0.1, 0.1}), ConfigError);
}

TEST(Split, PartitionAndStratificationProperty) {
    nc::Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 10 + rng.below(300);
        const std::size_t f = rng.below(n + 1);
        const auto docs = make_docs(n, f);
        const auto s = split_corpus(docs, {0.8, 0.1, 0.1}, rng.next_u64());
        std::set<std::string> seen;
        for (const auto* part : {&s.train, &s.dev, &s.test}) {
            for (const auto& d : *part) ASSERT_TRUE(seen.insert(d.address).second);
            if (part->empty()) continue;
            const double frac = static_cast<double>(count_fraud(*part)) / static_cast<double>(part->size());
            ASSERT_LE(std::abs(frac - static_cast<double>(f) / static_cast<double>(n)),
                      1.0 / static_cast<double>(part->size()) + 1e-12);
        }
        ASSERT_EQ(seen.size(), n);
        ASSERT_LE(std::abs(static_cast<double>(s.train.size()) - 0.8 * static_cast<double>(n)), 1.0);
        ASSERT_LE(std::abs(static_cast<double>(s.dev.size()) - 0.1 * static_cast<double>(n)), 1.0);
    }
}

TEST(Tokenize, TagField) {
    Vocabulary v;
    const auto s = tokenize({"", "tag= 1", 1}, v, 8);
    EXPECT_EQ(token_names(s, v), (std::vector<std::string>{"[CLS]", "tag", "=", "1", "[SEP]"}));
    EXPECT_EQ(s.ids.size(), 8u);
    for (std::size_t i = s.length; i < 8; ++i) EXPECT_EQ(s.ids[i], Vocabulary::kPad);
    EXPECT_EQ(s.label, 1);
}

TEST(Tokenize, EmptyText) {
    Vocabulary v;
    const auto s = tokenize({"", "", 0}, v, 4);
    EXPECT_EQ(s.ids, (std::vector<std::size_t>{Vocabulary::kCls, Vocabulary::kSep, Vocabulary::kPad, Vocabulary::kPad}));
}

TEST(Tokenize, NumberDigitByDigit) {
    Vocabulary v;
    const auto s = tokenize({"", "Value= 5.1", 0}, v);
    EXPECT_EQ(token_names(s, v), (std::vector<std::string>{"[CLS]", "Value", "=", "5", ".", "1", "[SEP]"}));
}

TEST(Tokenize, UnknownWordAndTruncation) {
    Vocabulary v;
    const auto s = tokenize({"", "hello tag", 0}, v);
    EXPECT_EQ(token_names(s, v), (std::vector<std::string>{"[CLS]", "[UNK]", "tag", "[SEP]"}));
    const auto t = tokenize({"", "1 2 3 4 5 6 7 8 9", 0}, v, 5);
    EXPECT_EQ(token_names(t, v), (std::vector<std::string>{"[CLS]", "1", "2", "3", "[SEP]"}));
}

TEST(Tokenize, VocabularyIsFixed) {
    Vocabulary a, b;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.token(i), b.token(i));
    EXPECT_EQ(a.token(Vocabulary::kPad), "[PAD]");
    EXPECT_EQ(a.token(Vocabulary::kCls), "[CLS]");
    EXPECT_EQ(a.id("ngram5"), a.id("ngram5"));
    EXPECT_NE(a.id("ngram5"), Vocabulary::kUnk);
}

TEST(Tokenize, RenderedDocumentsRoundTrip) {
    nc::Rng rng(23);
    const auto buckets = random_buckets(rng, 300, 40);
    Vocabulary v;
    for (const auto& [addr, b] : buckets) {
        const auto doc = render_document(b, 4);
        const auto s = tokenize(doc, v, 100000);
        std::string normalized = doc.text;
        normalized.erase(std::remove(normalized.begin(), normalized.end(), ' '), normalized.end());
        ASSERT_EQ(detokenize(s, v), normalized);
        for (std::size_t id : s.ids) ASSERT_LT(id, v.size());
        for (std::size_t i = 0; i < s.length; ++i) ASSERT_NE(s.ids[i], Vocabulary::kUnk);
        ASSERT_EQ(s.ids[0], Vocabulary::kCls);
        ASSERT_EQ(s.ids[s.length - 1], Vocabulary::kSep);
    }
}

TEST(Tsv, RoundTripAndShuffle) {
    const auto dir = std::filesystem::temp_directory_path() / "fraudfuse_tsv_test";
    std::filesystem::create_directories(dir);
    const auto docs = make_docs(30, 7);
    const auto split = split_corpus(docs, {0.8, 0.1, 0.1}, 1);
    write_split(dir, split);
    const auto back = read_split(dir);
    EXPECT_EQ(back.train, split.train);
    EXPECT_EQ(back.dev, split.dev);
    EXPECT_EQ(back.test, split.test);

    const auto a = read_tsv(dir / "Train.tsv", 77);
    const auto b = read_tsv(dir / "Train.tsv", 77);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].text, b[i].text);

    {
        std::ofstream bad(dir / "bad.tsv");
        bad << "0\tok\n1\ttoo\tmany\n";
    }
    try {
        read_tsv(dir / "bad.tsv");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
    }
    std::filesystem::remove_all(dir);
}
