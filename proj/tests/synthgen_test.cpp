#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fraudfuse/errors.hpp"
#include "fraudfuse/synthgen.hpp"

using namespace fraudfuse;
using namespace fraudfuse::synth;

namespace {

double mean_dt2(const txdata::BucketMap& buckets, const std::map<std::string, int>& labels, int cls) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [addr, b] : buckets) {
        if (labels.at(addr) != cls) continue;
        for (const auto& d : b.ngram_diffs) {
            sum += static_cast<double>(d.at(2));
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

}  // namespace

TEST(SynthConfig, Validation) {
    SynthConfig c;
    c.n_normal = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.n_fraud = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.fraud.mean_interarrival = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.normal.mean_interarrival = -1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.horizon = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_NO_THROW(SynthConfig{}.validate());
}

TEST(Generate, DeterministicPerSeed) {
    SynthConfig c;
    c.n_normal = 40;
    c.n_fraud = 30;
    const auto a = generate(c);
    const auto b = generate(c);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].from_address, b.records[i].from_address);
        EXPECT_EQ(a.records[i].to_address, b.records[i].to_address);
        EXPECT_EQ(a.records[i].value, b.records[i].value);
        EXPECT_EQ(a.records[i].timestamp, b.records[i].timestamp);
        EXPECT_EQ(a.records[i].tag, b.records[i].tag);
    }
    EXPECT_EQ(a.labels, b.labels);
    c.seed = 43;
    const auto d = generate(c);
    EXPECT_NE(a.records.front().from_address, d.records.front().from_address);
}

TEST(Generate, CountsOrderAndAddresses) {
    SynthConfig c;
    c.n_normal = 25;
    c.n_fraud = 15;
    const auto w = generate(c);
    EXPECT_EQ(w.labels.size(), 40u);
    EXPECT_EQ(w.records.size(), 25u * c.normal.tx_per_account + 15u * c.fraud.tx_per_account);
    std::size_t fraud = 0;
    for (const auto& [addr, label] : w.labels) {
        fraud += static_cast<std::size_t>(label);
        ASSERT_EQ(addr.size(), 42u);
        EXPECT_EQ(addr.substr(0, 2), "0x");
    }
    EXPECT_EQ(fraud, 15u);
    for (std::size_t i = 1; i < w.records.size(); ++i) EXPECT_LE(w.records[i - 1].timestamp, w.records[i].timestamp);
    for (const auto& r : w.records) {
        EXPECT_GT(r.value, 0.0);
        EXPECT_GE(r.timestamp, c.start_time);
    }
}

TEST(Generate, TagsMatchGroundTruth) {
    SynthConfig c;
    c.n_normal = 60;
    c.n_fraud = 40;
    const auto w = generate(c);
    const auto buckets = txdata::build_buckets(w.records);
    EXPECT_EQ(buckets.size(), w.labels.size());
    for (const auto& [addr, b] : buckets) {
        bool any_tag = false;
        bool sent_tagged = false;
        for (const auto& r : b.records) {
            any_tag |= r.base.tag == 1;
            sent_tagged |= r.base.tag == 1 && r.in_out == txdata::Direction::Outgoing;
        }
        if (w.labels.at(addr) == 1) {
            EXPECT_TRUE(sent_tagged) << addr;
        } else {
            EXPECT_FALSE(any_tag) << addr;
        }
        EXPECT_EQ(b.label, w.labels.at(addr));
    }
    for (const auto& r : w.records) EXPECT_EQ(r.tag, w.labels.at(r.from_address));
}

TEST(Generate, FanOutBoundsCounterparties) {
    SynthConfig c;
    c.n_normal = 50;
    c.n_fraud = 50;
    const auto w = generate(c);
    std::map<std::string, std::set<std::string>> peers;
    for (const auto& r : w.records) peers[r.from_address].insert(r.to_address);
    for (const auto& [addr, set] : peers) {
        const auto& beh = w.labels.at(addr) ? c.fraud : c.normal;
        EXPECT_LE(set.size(), beh.fan_out);
        for (const auto& p : set) EXPECT_EQ(w.labels.at(p), w.labels.at(addr));
    }
}

TEST(Generate, OutputsParseBack) {
    SynthConfig c;
    c.n_normal = 20;
    c.n_fraud = 10;
    const auto w = generate(c);
    for (const auto format : {txdata::Format::Csv, txdata::Format::Jsonl}) {
        std::stringstream ss;
        if (format == txdata::Format::Csv) {
            write_csv(ss, w.records);
        } else {
            write_jsonl(ss, w.records);
        }
        const auto back = txdata::parse_records(ss, format);
        ASSERT_EQ(back.size(), w.records.size());
        for (std::size_t i = 0; i < back.size(); ++i) {
            EXPECT_EQ(back[i].from_address, w.records[i].from_address);
            EXPECT_EQ(back[i].value, w.records[i].value);
            EXPECT_EQ(back[i].timestamp, w.records[i].timestamp);
            EXPECT_EQ(back[i].tag, w.records[i].tag);
        }
        EXPECT_NO_THROW(txdata::build_buckets(back));
    }
    std::stringstream gt;
    write_ground_truth(gt, w.labels);
    std::string line;
    std::getline(gt, line);
    EXPECT_EQ(line, "address,label");
    std::size_t rows = 0;
    while (std::getline(gt, line)) ++rows;
    EXPECT_EQ(rows, w.labels.size());
}

TEST(Generate, FraudBurstsAreFasterOverManySeeds) {
    int faster = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SynthConfig c;
        c.seed = seed;
        const auto w = generate(c);
        const auto buckets = txdata::build_buckets(w.records);
        if (mean_dt2(buckets, w.labels, 1) < mean_dt2(buckets, w.labels, 0)) ++faster;
    }
    EXPECT_GE(faster, 99);
}
