#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fraudfuse/fusion.hpp"
#include "fraudfuse/numcore/optim.hpp"
#include "fraudfuse/pipeline.hpp"

namespace fraudfuse::trainer {

enum class Scheduler { LinearWarmupDecay, Constant };

struct TrainConfig {
    double lr = 8e-6;
    double weight_decay = 0.001;
    std::size_t batch_size = 32;
    std::size_t grad_accum = 2;
    std::size_t epochs = 40;
    Scheduler scheduler = Scheduler::LinearWarmupDecay;
    double warmup_fraction = 0.1;
    std::uint64_t seed = 0;
    std::size_t eval_batch_size = 64;

    void validate() const;
    nlohmann::json to_json() const;
};

// Learning rate for update number `step` (0-based) out of `total` updates.
// Linear mode ramps 0 -> lr over the warmup updates, then decays to 0 at
// step == total.
class LrSchedule {
public:
    LrSchedule(Scheduler kind, double lr, std::size_t total_steps, double warmup_fraction);
    double at(std::size_t step) const;
    std::size_t warmup_steps() const { return warmup_; }
    std::size_t total_steps() const { return total_; }

private:
    Scheduler kind_;
    double lr_;
    std::size_t total_;
    std::size_t warmup_;
};

struct MetricsReport {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;

    static MetricsReport from_counts(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn);
    // Fraud (label 1) is positive; predicted fraud iff p >= 0.5.
    static MetricsReport from_predictions(const std::vector<double>& fraud_probs, const std::vector<int>& labels);
    std::size_t total() const { return tp + tn + fp + fn; }
    nlohmann::json to_json() const;
};

struct GateStats {
    std::array<double, 3> mean_g{0.0, 0.0, 0.0};
    double hard_fraction = 0.0;  // share of accounts whose largest weight is >= 0.99
};

struct EvalResult {
    MetricsReport metrics;
    GateStats gate;
    std::vector<double> fraud_probs;
};

EvalResult evaluate(const fusion::FraudModel& model, const pipeline::EncodedDocs& docs, const fusion::GraphInputs& graph,
                    std::size_t batch_size = 64);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double lr_last = 0.0;
    std::size_t updates = 0;
    MetricsReport dev;
    GateStats gate;
};

struct TrainResult {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_dev_f1 = -1.0;
    std::size_t total_updates = 0;
    nlohmann::json to_json() const;
};

struct TrainData {
    const pipeline::EncodedDocs* train = nullptr;
    const pipeline::EncodedDocs* dev = nullptr;
    fusion::GraphInputs graph;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Minibatch training with gradient accumulation and AdamW. The model ends up
// holding the parameters of the epoch with the best dev F1 (earliest on ties).
// Throws DataError on an empty split and NumericError on a non-finite loss.
TrainResult train(fusion::FraudModel& model, const TrainData& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Number of optimizer updates one epoch performs.
std::size_t updates_per_epoch(std::size_t n_train, std::size_t batch_size, std::size_t grad_accum);

void write_gate_stats_csv(const std::string& path, const TrainResult& result);

// Checkpoint meta carries the model config so evaluate can rebuild it.
void save_model(const std::string& path, const fusion::FraudModel& model, const nlohmann::json& extra = {});
std::unique_ptr<fusion::FraudModel> load_model(const std::string& path, nlohmann::json* meta_out = nullptr);

// Normal:fraud undersampling target.
struct Ratio {
    std::size_t normal = 5;
    std::size_t fraud = 5;
    std::string label() const { return std::to_string(normal) + ":" + std::to_string(fraud); }
};

std::vector<Ratio> default_ratios();  // 1:9 ... 9:1

// Keeps floor(k * r) documents of each class with k = min(N / r_n, F / r_f),
// choosing survivors with a seeded shuffle. Throws DataError naming the
// ratio when the kept minority class has fewer than 10 documents.
std::vector<corpus::AccountDocument> undersample(const std::vector<corpus::AccountDocument>& docs, const Ratio& ratio,
                                                 std::uint64_t seed);

struct SweepRow {
    Ratio ratio;
    std::size_t n_normal = 0;
    std::size_t n_fraud = 0;
    MetricsReport test;
};

struct SweepConfig {
    fusion::ModelConfig model;
    TrainConfig train;
    std::vector<Ratio> ratios = default_ratios();
    std::uint64_t seed = 0;
};

using SweepCallback = std::function<void(const SweepRow&)>;

// Per ratio: undersample, fresh stratified split, fresh model, train, test.
std::vector<SweepRow> ratio_sweep(const std::vector<corpus::AccountDocument>& docs, const pipeline::Dataset& dataset,
                                  const SweepConfig& cfg, const SweepCallback& on_row = {});

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace fraudfuse::trainer
