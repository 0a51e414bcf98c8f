#include "fraudfuse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fraudfuse/errors.hpp"
#include "fraudfuse/numcore/checkpoint.hpp"
#include "fraudfuse/numcore/ops.hpp"

namespace fraudfuse::trainer {

using nc::Tensor;

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (grad_accum == 0) throw ConfigError("grad_accum must be >= 1");
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ConfigError("warmup_fraction must be in [0, 1)");
    if (eval_batch_size == 0) throw ConfigError("eval_batch_size must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"lr", lr},
            {"weight_decay", weight_decay},
            {"batch_size", batch_size},
            {"grad_accum", grad_accum},
            {"epochs", epochs},
            {"scheduler", scheduler == Scheduler::Constant ? "constant" : "linear_warmup_decay"},
            {"warmup_fraction", warmup_fraction},
            {"seed", seed}};
}

LrSchedule::LrSchedule(Scheduler kind, double lr, std::size_t total_steps, double warmup_fraction)
    : kind_(kind), lr_(lr), total_(total_steps),
      warmup_(static_cast<std::size_t>(std::ceil(warmup_fraction * static_cast<double>(total_steps)))) {}

double LrSchedule::at(std::size_t step) const {
    if (kind_ == Scheduler::Constant) return lr_;
    if (step < warmup_) return lr_ * static_cast<double>(step) / static_cast<double>(warmup_);
    if (step >= total_) return 0.0;
    return lr_ * static_cast<double>(total_ - step) / static_cast<double>(total_ - warmup_);
}

MetricsReport MetricsReport::from_counts(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) {
    MetricsReport m;
    m.tp = tp;
    m.tn = tn;
    m.fp = fp;
    m.fn = fn;
    const auto d = [](std::size_t x) { return static_cast<double>(x); };
    m.precision = tp + fp == 0 ? 0.0 : d(tp) / d(tp + fp);
    m.recall = tp + fn == 0 ? 0.0 : d(tp) / d(tp + fn);
    m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    m.accuracy = m.total() == 0 ? 0.0 : d(tp + tn) / d(m.total());
    return m;
}

MetricsReport MetricsReport::from_predictions(const std::vector<double>& probs, const std::vector<int>& labels) {
    if (probs.size() != labels.size()) throw ShapeError("metrics: prediction and label counts differ");
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool pred = probs[i] >= 0.5;
        const bool truth = labels[i] == 1;
        if (pred && truth) ++tp;
        else if (pred) ++fp;
        else if (truth) ++fn;
        else ++tn;
    }
    return from_counts(tp, tn, fp, fn);
}

nlohmann::json MetricsReport::to_json() const {
    return {{"tp", tp},
            {"tn", tn},
            {"fp", fp},
            {"fn", fn},
            {"precision", precision},
            {"recall", recall},
            {"f1", f1},
            {"accuracy", accuracy}};
}

namespace {

std::vector<const corpus::TokenSequence*> gather_seqs(const pipeline::EncodedDocs& docs,
                                                      const std::vector<std::size_t>& idx) {
    std::vector<const corpus::TokenSequence*> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(&docs.seqs[i]);
    return out;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

}  // namespace

EvalResult evaluate(const fusion::FraudModel& model, const pipeline::EncodedDocs& docs, const fusion::GraphInputs& graph,
                    std::size_t batch_size) {
    if (docs.size() == 0) throw DataError("evaluate: no documents");
    nc::NoGradGuard no_grad;
    EvalResult res;
    res.fraud_probs.reserve(docs.size());
    std::size_t hard = 0;
    for (std::size_t start = 0; start < docs.size(); start += batch_size) {
        std::vector<std::size_t> idx(std::min(batch_size, docs.size() - start));
        std::iota(idx.begin(), idx.end(), start);
        fusion::ForwardRequest req;
        req.seqs = gather_seqs(docs, idx);
        req.node_rows = pick(docs.rows, idx);
        req.mode = fusion::Mode::Eval;
        const auto out = model.forward(req, graph);
        for (std::size_t b = 0; b < idx.size(); ++b) {
            res.fraud_probs.push_back(out.probs.at(b, 1));
            double top = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                res.gate.mean_g[k] += out.gate.g.at(b, k);
                top = std::max(top, out.gate.g.at(b, k));
            }
            hard += top >= 0.99 ? 1 : 0;
        }
    }
    for (double& g : res.gate.mean_g) g /= static_cast<double>(docs.size());
    res.gate.hard_fraction = static_cast<double>(hard) / static_cast<double>(docs.size());
    res.metrics = MetricsReport::from_predictions(res.fraud_probs, docs.labels);
    return res;
}

std::size_t updates_per_epoch(std::size_t n_train, std::size_t batch_size, std::size_t grad_accum) {
    const std::size_t batches = (n_train + batch_size - 1) / batch_size;
    return (batches + grad_accum - 1) / grad_accum;
}

TrainResult train(fusion::FraudModel& model, const TrainData& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (!data.train || data.train->size() == 0) throw DataError("train: empty training split");
    if (!data.dev || data.dev->size() == 0) throw DataError("train: empty dev split");
    const auto& train_docs = *data.train;
    const std::size_t n = train_docs.size();
    const std::size_t per_epoch = updates_per_epoch(n, cfg.batch_size, cfg.grad_accum);
    const LrSchedule schedule(cfg.scheduler, cfg.lr, per_epoch * cfg.epochs, cfg.warmup_fraction);

    nc::AdamWConfig opt_cfg;
    opt_cfg.weight_decay = cfg.weight_decay;
    nc::AdamW optimizer(opt_cfg);
    auto& store = model.params();
    store.zero_grad();

    nc::Rng order_rng(cfg.seed, "epoch-order");
    nc::Rng noise_rng(cfg.seed, "train-noise");
    TrainResult result;
    std::vector<std::vector<double>> best;
    std::size_t step = 0;
    const double accum_scale = 1.0 / static_cast<double>(cfg.grad_accum);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        order_rng.shuffle(std::span<std::size_t>(order));
        const double tau = model.config().tau_anneal
                               ? std::max(0.5, model.config().tau * std::pow(0.995, static_cast<double>(epoch - 1)))
                               : 0.0;

        EpochRecord rec;
        rec.epoch = epoch;
        double loss_sum = 0.0;
        std::size_t batches = 0, pending = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + cfg.batch_size)));
            fusion::ForwardRequest req;
            req.seqs = gather_seqs(train_docs, idx);
            req.node_rows = pick(train_docs.rows, idx);
            req.mode = fusion::Mode::Train;
            req.rng = &noise_rng;
            req.tau_override = tau;
            const auto labels = pick(train_docs.labels, idx);
            const auto out = model.forward(req, data.graph);
            const Tensor loss = nc::binary_cross_entropy(out.fraud_prob(), labels);
            if (!std::isfinite(loss.item())) {
                std::string dump;
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    dump += "\n  " + train_docs.addresses[idx[k]] + " label=" + std::to_string(labels[k]) +
                            " p=" + std::to_string(out.probs.at(k, 1));
                }
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batches) + "; batch contents:" + dump);
            }
            nc::backward(nc::scale(loss, accum_scale));
            loss_sum += loss.item();
            ++batches;
            ++pending;
            const bool last = start + cfg.batch_size >= n;
            if (pending == cfg.grad_accum || last) {
                rec.lr_last = schedule.at(step);
                optimizer.step(store, rec.lr_last);
                store.zero_grad();
                ++step;
                ++rec.updates;
                pending = 0;
            }
        }
        rec.train_loss = loss_sum / static_cast<double>(batches);

        const auto dev = evaluate(model, *data.dev, data.graph, cfg.eval_batch_size);
        rec.dev = dev.metrics;
        rec.gate = dev.gate;
        if (rec.dev.f1 > result.best_dev_f1) {
            result.best_dev_f1 = rec.dev.f1;
            result.best_epoch = epoch;
            best = store.snapshot();
        }
        result.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    result.total_updates = step;
    store.restore(best);
    return result;
}

nlohmann::json TrainResult::to_json() const {
    nlohmann::json epochs_json = nlohmann::json::array();
    for (const auto& e : epochs) {
        epochs_json.push_back({{"epoch", e.epoch},
                               {"train_loss", e.train_loss},
                               {"lr", e.lr_last},
                               {"updates", e.updates},
                               {"dev", e.dev.to_json()},
                               {"gate", {{"mean_g1", e.gate.mean_g[0]},
                                         {"mean_g2", e.gate.mean_g[1]},
                                         {"mean_g3", e.gate.mean_g[2]},
                                         {"hard_fraction", e.gate.hard_fraction}}}});
    }
    return {{"epochs", epochs_json}, {"best_epoch", best_epoch}, {"best_dev_f1", best_dev_f1},
            {"total_updates", total_updates}};
}

void write_gate_stats_csv(const std::string& path, const TrainResult& result) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "epoch,mean_g1,mean_g2,mean_g3,hard_fraction\n";
    char buf[256];
    for (const auto& e : result.epochs) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.gate.mean_g[0], e.gate.mean_g[1],
                      e.gate.mean_g[2], e.gate.hard_fraction);
        out << buf;
    }
}

void save_model(const std::string& path, const fusion::FraudModel& model, const nlohmann::json& extra) {
    nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
    meta["model"] = model.config().to_json();
    nc::save_checkpoint(path, model.params(), meta);
}

std::unique_ptr<fusion::FraudModel> load_model(const std::string& path, nlohmann::json* meta_out) {
    const auto ckpt = nc::load_checkpoint(path);
    if (!ckpt.meta.contains("model")) throw DataError("checkpoint " + path + " has no model config");
    auto model = std::make_unique<fusion::FraudModel>(fusion::ModelConfig::from_json(ckpt.meta.at("model")));
    nc::apply_checkpoint(ckpt, model->params());
    if (meta_out) *meta_out = ckpt.meta;
    return model;
}

std::vector<Ratio> default_ratios() {
    std::vector<Ratio> out;
    for (std::size_t r = 1; r <= 9; ++r) out.push_back({r, 10 - r});
    return out;
}

std::vector<corpus::AccountDocument> undersample(const std::vector<corpus::AccountDocument>& docs, const Ratio& ratio,
                                                 std::uint64_t seed) {
    if (ratio.normal == 0 || ratio.fraud == 0) throw ConfigError("ratio " + ratio.label() + " must have both parts > 0");
    std::vector<std::size_t> normal, fraud;
    for (std::size_t i = 0; i < docs.size(); ++i) (docs[i].label == 1 ? fraud : normal).push_back(i);
    const double k = std::min(static_cast<double>(normal.size()) / static_cast<double>(ratio.normal),
                              static_cast<double>(fraud.size()) / static_cast<double>(ratio.fraud));
    const auto keep_n = std::min(normal.size(), static_cast<std::size_t>(std::floor(k * static_cast<double>(ratio.normal) + 1e-9)));
    const auto keep_f = std::min(fraud.size(), static_cast<std::size_t>(std::floor(k * static_cast<double>(ratio.fraud) + 1e-9)));
    if (std::min(keep_n, keep_f) < 10) {
        throw DataError("ratio " + ratio.label() + ": only " + std::to_string(keep_n) + " normal / " +
                        std::to_string(keep_f) + " fraud accounts after undersampling, need at least 10 of each");
    }
    nc::Rng rng(seed, "undersample:" + ratio.label());
    rng.shuffle(std::span<std::size_t>(normal));
    rng.shuffle(std::span<std::size_t>(fraud));
    std::vector<std::size_t> kept(normal.begin(), normal.begin() + static_cast<std::ptrdiff_t>(keep_n));
    kept.insert(kept.end(), fraud.begin(), fraud.begin() + static_cast<std::ptrdiff_t>(keep_f));
    std::sort(kept.begin(), kept.end());
    std::vector<corpus::AccountDocument> out;
    out.reserve(kept.size());
    for (std::size_t i : kept) out.push_back(docs[i]);
    return out;
}

std::vector<SweepRow> ratio_sweep(const std::vector<corpus::AccountDocument>& docs, const pipeline::Dataset& dataset,
                                  const SweepConfig& cfg, const SweepCallback& on_row) {
    const auto graph = dataset.graph_inputs();
    std::vector<SweepRow> rows;
    for (const auto& ratio : cfg.ratios) {
        const auto subset = undersample(docs, ratio, cfg.seed);
        const auto split = corpus::split_corpus(subset, {0.8, 0.1, 0.1}, cfg.seed);
        const std::size_t max_len = cfg.model.encoder.max_len;
        const auto train_docs = pipeline::encode(split.train, dataset.index, max_len);
        const auto dev_docs = pipeline::encode(split.dev, dataset.index, max_len);
        const auto test_docs = pipeline::encode(split.test, dataset.index, max_len);
        fusion::FraudModel model(cfg.model);
        train(model, {&train_docs, &dev_docs, graph}, cfg.train);
        SweepRow row;
        row.ratio = ratio;
        for (const auto& d : subset) (d.label == 1 ? row.n_fraud : row.n_normal) += 1;
        row.test = evaluate(model, test_docs, graph, cfg.train.eval_batch_size).metrics;
        if (on_row) on_row(row);
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "ratio,f1,recall,precision\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f\n", r.ratio.label().c_str(), r.test.f1, r.test.recall,
                      r.test.precision);
        out << buf;
    }
}

}  // namespace fraudfuse::trainer
