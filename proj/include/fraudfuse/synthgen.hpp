#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "fraudfuse/txdata.hpp"

namespace fraudfuse::synth {

struct ClassBehavior {
    double mean_interarrival = 86400.0;  // seconds between an account's sends
    std::size_t fan_out = 3;             // distinct counterparties per account
    std::size_t tx_per_account = 6;      // sends per account
    double value_mu = 0.0;               // log-normal value parameters
    double value_sigma = 1.0;
};

struct SynthConfig {
    std::size_t n_normal = 500;
    std::size_t n_fraud = 500;
    ClassBehavior normal{86400.0, 3, 6, 0.0, 1.0};
    ClassBehavior fraud{30.0, 12, 12, 1.0, 0.75};
    std::int64_t horizon = 30 * 86400;
    std::int64_t start_time = 1600000000;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SynthWorld {
    std::vector<txdata::TransactionRecord> records;  // ascending timestamp
    std::map<std::string, int> labels;               // address -> ground truth
};

// Each account starts at a uniform time in the horizon and sends
// tx_per_account transfers with exponential inter-arrival times, cycling over
// fan_out counterparties drawn from its own class. Records sent by fraud
// accounts carry tag 1. Values are log-normal, rounded to 8 decimals.
SynthWorld generate(const SynthConfig& cfg);

void write_csv(std::ostream& out, const std::vector<txdata::TransactionRecord>& records);
void write_jsonl(std::ostream& out, const std::vector<txdata::TransactionRecord>& records);
void write_ground_truth(std::ostream& out, const std::map<std::string, int>& labels);

}  // namespace fraudfuse::synth
