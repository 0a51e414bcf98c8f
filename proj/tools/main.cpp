#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fraudfuse/corpusgen.hpp"
#include "fraudfuse/errors.hpp"
#include "fraudfuse/graphbuild.hpp"
#include "fraudfuse/numcore/gradcheck.hpp"
#include "fraudfuse/numcore/ops.hpp"
#include "fraudfuse/pipeline.hpp"
#include "fraudfuse/synthgen.hpp"
#include "fraudfuse/trainer.hpp"
#include "fraudfuse/txdata.hpp"

namespace fs = std::filesystem;
using namespace fraudfuse;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Common {
    std::uint64_t seed = 42;
    std::string config;
    std::string out_dir = ".";
};

struct GraphOptions {
    std::vector<double> alpha{1.0, 1.0, 1.0, 1.0};
    std::string time_transform = "linear";
    bool symmetrize = true;
    int n_max = 5;

    graph::GraphBuildConfig resolve() const {
        graph::GraphBuildConfig cfg;
        if (alpha.size() != 4) throw ConfigError("alpha needs exactly 4 weights (n = 2..5)");
        std::copy(alpha.begin(), alpha.end(), cfg.alpha.begin());
        if (time_transform == "linear") {
            cfg.time_transform = graph::TimeTransform::Linear;
        } else if (time_transform == "inverse") {
            cfg.time_transform = graph::TimeTransform::Inverse;
        } else {
            throw ConfigError("time-transform must be linear or inverse, got " + time_transform);
        }
        cfg.symmetrize = symmetrize;
        cfg.validate();
        if (n_max < 2) throw ConfigError("n-max must be >= 2");
        return cfg;
    }

    json to_json() const {
        return {{"alpha", alpha}, {"time_transform", time_transform}, {"symmetrize", symmetrize}, {"n_max", n_max}};
    }

    static GraphOptions from_json(const json& j) {
        GraphOptions g;
        g.alpha = j.at("alpha").get<std::vector<double>>();
        g.time_transform = j.at("time_transform").get<std::string>();
        g.symmetrize = j.at("symmetrize").get<bool>();
        g.n_max = j.at("n_max").get<int>();
        return g;
    }
};

struct ModelOptions {
    fusion::ModelConfig cfg;
    int gate_lock = 0;  // 1..3, 0 = dynamic gating
    std::string noise = "sampled";

    fusion::ModelConfig resolve(std::uint64_t seed) const {
        fusion::ModelConfig out = cfg;
        out.init_seed = seed;
        if (gate_lock < 0 || gate_lock > 3) throw ConfigError("gate-lock must be 0 (off) or 1..3");
        if (gate_lock > 0) out.gate_lock = gate_lock - 1;
        if (noise == "sampled") {
            out.train_noise = fusion::NoiseMode::Sampled;
        } else if (noise == "none") {
            out.train_noise = fusion::NoiseMode::None;
        } else {
            throw ConfigError("noise must be sampled or none, got " + noise);
        }
        out.validate();
        return out;
    }
};

struct TrainOptions {
    trainer::TrainConfig cfg;
    std::string scheduler = "linear";

    trainer::TrainConfig resolve(std::uint64_t seed) const {
        trainer::TrainConfig out = cfg;
        out.seed = seed;
        if (scheduler == "linear") {
            out.scheduler = trainer::Scheduler::LinearWarmupDecay;
        } else if (scheduler == "constant") {
            out.scheduler = trainer::Scheduler::Constant;
        } else {
            throw ConfigError("scheduler must be linear or constant, got " + scheduler);
        }
        out.validate();
        return out;
    }
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--config", c.config, "TOML config file; flags override its values")->configurable(false);
    sub->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
}

void add_graph_options(CLI::App* sub, GraphOptions& g) {
    sub->add_option("--alpha", g.alpha, "Weights of the 2..5-gram time differences")->expected(4)->capture_default_str();
    sub->add_option("--time-transform", g.time_transform, "linear | inverse")->capture_default_str();
    sub->add_option("--symmetrize", g.symmetrize, "Symmetrize the adjacency before normalizing")->capture_default_str();
    sub->add_option("--n-max", g.n_max, "Largest n-gram order")->capture_default_str();
}

void add_model_options(CLI::App* sub, ModelOptions& m) {
    auto& e = m.cfg.encoder;
    sub->add_option("--d-model", e.d_model, "Encoder width")->capture_default_str();
    sub->add_option("--layers", e.n_layers, "Encoder layers")->capture_default_str();
    sub->add_option("--heads", e.n_heads, "Attention heads")->capture_default_str();
    sub->add_option("--d-ff", e.d_ff, "Feed-forward width")->capture_default_str();
    sub->add_option("--max-len", e.max_len, "Token sequence length")->capture_default_str();
    sub->add_option("--dropout", e.dropout, "Dropout rate")->capture_default_str();
    auto& g = m.cfg.gcn;
    sub->add_option("--gcn-hidden", g.d_hidden, "GCN hidden width")->capture_default_str();
    sub->add_option("--gcn-out", g.d_out, "GCN output width")->capture_default_str();
    sub->add_option("--gcn-layers", g.n_layers, "GCN layers")->capture_default_str();
    sub->add_option("--d-gate", m.cfg.d_gate, "Gating network hidden width")->capture_default_str();
    sub->add_option("--tau", m.cfg.tau, "Gate temperature")->capture_default_str();
    sub->add_option("--hard", m.cfg.hard, "Straight-through one-hot gate")->capture_default_str();
    sub->add_option("--tau-anneal", m.cfg.tau_anneal, "Anneal tau per epoch")->capture_default_str();
    sub->add_option("--gate-lock", m.gate_lock, "Force strategy 1, 2 or 3 (0 = learned gate)")->capture_default_str();
    sub->add_option("--noise", m.noise, "Gate noise during training: sampled | none")->capture_default_str();
}

void add_train_options(CLI::App* sub, TrainOptions& t) {
    auto& c = t.cfg;
    sub->add_option("--lr", c.lr, "Peak learning rate")->capture_default_str();
    sub->add_option("--weight-decay", c.weight_decay, "AdamW weight decay")->capture_default_str();
    sub->add_option("--batch-size", c.batch_size, "Minibatch size")->capture_default_str();
    sub->add_option("--grad-accum", c.grad_accum, "Minibatches per update")->capture_default_str();
    sub->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
    sub->add_option("--scheduler", t.scheduler, "linear | constant")->capture_default_str();
    sub->add_option("--warmup", c.warmup_fraction, "Warmup share of all updates")->capture_default_str();
    sub->add_option("--eval-batch-size", c.eval_batch_size, "Batch size for evaluation")->capture_default_str();
}

std::string normalize_key(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

// Fills options of `active` that were not given on the command line from the
// config file. Keys may sit at the top level or under a [subcommand] table;
// keys of other subcommands are checked but not applied.
void apply_config_file(CLI::App& app, CLI::App* active, const std::string& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(path);
    } catch (const CLI::Error& e) {
        throw ConfigError("cannot parse config " + path + ": " + e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        CLI::App* target = active;
        if (!item.parents.empty()) {
            if (item.parents.size() != 1) throw ConfigError("config " + path + ": nested key " + item.fullname());
            target = app.get_subcommand_no_throw(item.parents[0]);
            if (!target) throw ConfigError("config " + path + ": unknown section [" + item.parents[0] + "]");
        }
        CLI::Option* opt = target->get_option_no_throw("--" + normalize_key(item.name));
        if (!opt || !opt->get_configurable()) {
            throw ConfigError("config " + path + ": unknown key '" + item.fullname() + "' for " + target->get_name());
        }
        if (target != active || opt->count() > 0) continue;
        for (const auto& v : item.inputs) opt->add_result(v);
        try {
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw ConfigError("config " + path + ": bad value for '" + item.fullname() + "': " + e.what());
        }
    }
}

fs::path prepare_out_dir(const Common& c) {
    fs::path dir(c.out_dir);
    fs::create_directories(dir);
    return dir;
}

void log_resolved(CLI::App* sub, const fs::path& out_dir) {
    const std::string text = sub->config_to_str(true, false);
    spdlog::info("resolved config for '{}':\n{}", sub->get_name(), text);
    std::ofstream out(out_dir / (sub->get_name() + ".config.toml"));
    out << "[" << sub->get_name() << "]\n" << text;
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " is required");
    if (!fs::is_regular_file(path)) throw DataError(what + " not found: " + path);
}

std::vector<txdata::TransactionRecord> load_records(const std::string& path) {
    require_file(path, "input transactions file");
    const auto format = txdata::format_from_path(path);
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return txdata::parse_records(in, format);
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json gate_json(const trainer::GateStats& g) {
    return {{"mean_g1", g.mean_g[0]}, {"mean_g2", g.mean_g[1]}, {"mean_g3", g.mean_g[2]}, {"hard_fraction", g.hard_fraction}};
}

// ---- subcommands ----

struct SynthArgs {
    synth::SynthConfig cfg;
    std::string format = "csv";
};

void run_synth(const Common& c, SynthArgs args, const fs::path& out) {
    args.cfg.seed = c.seed;
    args.cfg.validate();
    if (args.format != "csv" && args.format != "jsonl") throw ConfigError("format must be csv or jsonl");
    const auto world = synth::generate(args.cfg);
    const fs::path tx = out / ("transactions." + args.format);
    std::ofstream f(tx);
    if (args.format == "csv") {
        synth::write_csv(f, world.records);
    } else {
        synth::write_jsonl(f, world.records);
    }
    std::ofstream gt(out / "ground_truth.csv");
    synth::write_ground_truth(gt, world.labels);
    spdlog::info("wrote {} records for {} accounts to {}", world.records.size(), world.labels.size(), tx.string());
}

void run_ingest(const std::string& input, const GraphOptions& g, const fs::path& out) {
    g.resolve();
    const auto records = load_records(input);
    const auto buckets = txdata::build_buckets(records, g.n_max);
    std::size_t fraud = 0, min_len = records.empty() ? 0 : SIZE_MAX, max_len = 0, self = 0;
    std::int64_t t_min = INT64_MAX, t_max = INT64_MIN;
    for (const auto& [addr, b] : buckets) {
        fraud += static_cast<std::size_t>(b.label);
        min_len = std::min(min_len, b.records.size());
        max_len = std::max(max_len, b.records.size());
    }
    for (const auto& r : records) {
        self += r.from_address == r.to_address ? 1 : 0;
        t_min = std::min(t_min, r.timestamp);
        t_max = std::max(t_max, r.timestamp);
    }
    json j{{"records", records.size()},
           {"accounts", buckets.size()},
           {"fraud_accounts", fraud},
           {"normal_accounts", buckets.size() - fraud},
           {"self_transfers", self},
           {"bucket_size", {{"min", min_len},
                            {"max", max_len},
                            {"mean", buckets.empty() ? 0.0 : 2.0 * static_cast<double>(records.size()) /
                                                                  static_cast<double>(buckets.size())}}},
           {"first_timestamp", records.empty() ? 0 : t_min},
           {"last_timestamp", records.empty() ? 0 : t_max}};
    write_json(out / "buckets_summary.json", j);
    spdlog::info("{} records, {} accounts ({} fraud)", records.size(), buckets.size(), fraud);
}

void run_build_graph(const std::string& input, const GraphOptions& g, const fs::path& out) {
    const auto cfg = g.resolve();
    const auto ds = pipeline::build_dataset(load_records(input), cfg, g.n_max);
    graph::write_matrix_dump(out / "graph.bin", ds.graph.adjacency);
    graph::write_matrix_dump(out / "graph_normalized.bin", ds.normalized.a_hat);
    graph::write_index_sidecar(out / "graph.index.json", ds.index);
    spdlog::info("graph with {} nodes, {} nonzero weights", ds.index.size(), (ds.graph.adjacency.array() != 0.0).count());
}

void run_make_corpus(const Common& c, const std::string& input, const GraphOptions& g, const std::vector<double>& ratios,
                     const fs::path& out) {
    g.resolve();
    if (ratios.size() != 3) throw ConfigError("split needs three ratios (train dev test)");
    const auto buckets = txdata::build_buckets(load_records(input), g.n_max);
    const auto docs = pipeline::render_all(buckets, c.seed);
    const auto split = corpus::split_corpus(docs, {ratios[0], ratios[1], ratios[2]}, c.seed);
    corpus::write_split(out, split);
    spdlog::info("corpus: {} train / {} dev / {} test documents", split.train.size(), split.dev.size(), split.test.size());
}

fs::path corpus_dir_or(const std::string& dir, const fs::path& out) { return dir.empty() ? out : fs::path(dir); }

corpus::CorpusSplit load_split(const fs::path& dir) {
    for (const char* name : {"Train.tsv", "dev.tsv", "test.tsv"}) {
        if (!fs::is_regular_file(dir / name)) throw DataError("corpus file not found: " + (dir / name).string());
    }
    return corpus::read_split(dir);
}

void run_train(const Common& c, const std::string& input, const std::string& corpus_dir, const GraphOptions& g,
               const ModelOptions& m, const TrainOptions& t, const fs::path& out) {
    const auto gcfg = g.resolve();
    const auto mcfg = m.resolve(c.seed);
    const auto tcfg = t.resolve(c.seed);
    const auto split = load_split(corpus_dir_or(corpus_dir, out));
    const auto ds = pipeline::build_dataset(load_records(input), gcfg, g.n_max);
    const std::size_t L = mcfg.encoder.max_len;
    const auto train_docs = pipeline::encode(split.train, ds.index, L);
    const auto dev_docs = pipeline::encode(split.dev, ds.index, L);
    const auto test_docs = pipeline::encode(split.test, ds.index, L);
    const auto graph = ds.graph_inputs();

    fusion::FraudModel model(mcfg);
    spdlog::info("model has {} parameters; {} train / {} dev / {} test accounts", model.params().scalar_count(),
                 train_docs.size(), dev_docs.size(), test_docs.size());
    const auto result = trainer::train(model, {&train_docs, &dev_docs, graph}, tcfg, [](const trainer::EpochRecord& e) {
        spdlog::info("epoch {:>3}  loss {:.4f}  dev F1 {:.4f}  P {:.4f}  R {:.4f}  gate {:.3f}/{:.3f}/{:.3f}", e.epoch,
                     e.train_loss, e.dev.f1, e.dev.precision, e.dev.recall, e.gate.mean_g[0], e.gate.mean_g[1],
                     e.gate.mean_g[2]);
    });
    const auto test = trainer::evaluate(model, test_docs, graph, tcfg.eval_batch_size);

    trainer::save_model((out / "checkpoint.cfck").string(), model,
                        {{"graph", g.to_json()},
                         {"train", tcfg.to_json()},
                         {"best_epoch", result.best_epoch},
                         {"best_dev_f1", result.best_dev_f1}});
    json metrics = result.to_json();
    metrics["test"] = test.metrics.to_json();
    metrics["test_gate"] = gate_json(test.gate);
    write_json(out / "metrics.json", metrics);
    trainer::write_gate_stats_csv((out / "gate_stats.csv").string(), result);
    spdlog::info("best dev F1 {:.4f} at epoch {}; test F1 {:.4f}", result.best_dev_f1, result.best_epoch, test.metrics.f1);
}

void run_evaluate(const std::string& checkpoint, const std::string& input, const std::string& corpus_dir,
                  const std::string& split_name, const fs::path& out) {
    const fs::path ckpt = checkpoint.empty() ? out / "checkpoint.cfck" : fs::path(checkpoint);
    require_file(ckpt.string(), "checkpoint");
    json meta;
    const auto model = trainer::load_model(ckpt.string(), &meta);
    if (!meta.contains("graph")) throw DataError("checkpoint " + ckpt.string() + " lacks the graph settings");
    const auto g = GraphOptions::from_json(meta.at("graph"));
    const auto split = load_split(corpus_dir_or(corpus_dir, out));
    const std::vector<corpus::AccountDocument>* docs = nullptr;
    if (split_name == "dev") {
        docs = &split.dev;
    } else if (split_name == "test") {
        docs = &split.test;
    } else if (split_name == "train") {
        docs = &split.train;
    } else {
        throw ConfigError("split must be train, dev or test");
    }
    const auto ds = pipeline::build_dataset(load_records(input), g.resolve(), g.n_max);
    const auto encoded = pipeline::encode(*docs, ds.index, model->config().encoder.max_len);
    const auto res = trainer::evaluate(*model, encoded, ds.graph_inputs());
    write_json(out / "evaluation.json",
               {{"split", split_name}, {"metrics", res.metrics.to_json()}, {"gate", gate_json(res.gate)}});
    spdlog::info("{} F1 {:.4f}  P {:.4f}  R {:.4f}", split_name, res.metrics.f1, res.metrics.precision, res.metrics.recall);
}

std::vector<trainer::Ratio> parse_ratios(const std::vector<std::string>& items) {
    std::vector<trainer::Ratio> out;
    for (const auto& s : items) {
        if (s.empty()) continue;
        const auto colon = s.find(':');
        try {
            if (colon == std::string::npos) throw std::invalid_argument(s);
            std::size_t a = 0, b = 0;
            const auto n = std::stoul(s.substr(0, colon), &a);
            const auto f = std::stoul(s.substr(colon + 1), &b);
            if (a != colon || b != s.size() - colon - 1) throw std::invalid_argument(s);
            out.push_back({n, f});
        } catch (const std::logic_error&) {
            throw ConfigError("ratio must look like normal:fraud, got " + s);
        }
    }
    return out.empty() ? trainer::default_ratios() : out;
}

void run_sweep(const Common& c, const std::string& input, const GraphOptions& g, const ModelOptions& m,
               const TrainOptions& t, const std::vector<std::string>& ratios, const fs::path& out) {
    trainer::SweepConfig cfg;
    cfg.model = m.resolve(c.seed);
    cfg.train = t.resolve(c.seed);
    cfg.ratios = parse_ratios(ratios);
    cfg.seed = c.seed;
    const auto ds = pipeline::build_dataset(load_records(input), g.resolve(), g.n_max);
    const auto docs = pipeline::render_all(ds.buckets, c.seed);
    const auto rows = trainer::ratio_sweep(docs, ds, cfg, [](const trainer::SweepRow& r) {
        spdlog::info("ratio {}  ({} normal / {} fraud)  F1 {:.4f}  R {:.4f}  P {:.4f}", r.ratio.label(), r.n_normal,
                     r.n_fraud, r.test.f1, r.test.recall, r.test.precision);
    });
    trainer::write_sweep_csv((out / "sweep.csv").string(), rows);
}

struct GradCheckArgs {
    std::size_t batch = 4;
    std::size_t coords = 32;
    double tolerance = 1e-4;
    double step = 1e-5;
    std::size_t accounts = 40;
};

bool run_grad_check(const Common& c, const std::string& input, const GraphOptions& g, const ModelOptions& m,
                    const GradCheckArgs& a, const fs::path& out) {
    const auto start = std::chrono::steady_clock::now();
    auto mcfg = m.resolve(c.seed);
    mcfg.encoder.dropout = 0.0;
    mcfg.hard = false;
    mcfg.gate_lock.reset();
    std::vector<txdata::TransactionRecord> records;
    if (input.empty()) {
        synth::SynthConfig sc;
        sc.n_normal = std::max<std::size_t>(1, a.accounts / 2);
        sc.n_fraud = std::max<std::size_t>(1, a.accounts - sc.n_normal);
        sc.seed = c.seed;
        records = synth::generate(sc).records;
    } else {
        records = load_records(input);
    }
    const auto ds = pipeline::build_dataset(std::move(records), g.resolve(), g.n_max);
    auto docs = pipeline::render_all(ds.buckets, c.seed);
    nc::Rng pick(c.seed, "gradcheck-batch");
    pick.shuffle(std::span<corpus::AccountDocument>(docs));
    docs.resize(std::min(docs.size(), a.batch));
    const auto encoded = pipeline::encode(docs, ds.index, mcfg.encoder.max_len);
    const auto graph = ds.graph_inputs();

    fusion::FraudModel model(mcfg);
    fusion::ForwardRequest req;
    for (const auto& s : encoded.seqs) req.seqs.push_back(&s);
    req.node_rows = encoded.rows;
    req.mode = fusion::Mode::Train;
    req.no_dropout = true;
    nc::Rng noise_rng(c.seed, "gradcheck-noise");
    std::vector<double> noise(encoded.size() * fusion::kStrategies);
    for (double& v : noise) v = noise_rng.gumbel();
    req.fixed_noise = nc::Tensor::from(encoded.size(), fusion::kStrategies, noise);
    auto loss = [&] { return nc::binary_cross_entropy(model.forward(req, graph).fraud_prob(), encoded.labels); };

    nc::GradCheckOptions opts;
    opts.tolerance = a.tolerance;
    opts.step = a.step;
    opts.coords_per_param = a.coords;
    opts.seed = c.seed;
    const auto report = nc::grad_check(loss, model.params().all(), opts);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json entries = json::array();
    for (const auto& e : report.entries) {
        entries.push_back({{"name", e.name},
                           {"coords_checked", e.coords_checked},
                           {"max_rel_error", e.max_rel_error},
                           {"worst_index", e.worst_index},
                           {"analytic", e.analytic},
                           {"numeric", e.numeric},
                           {"passed", e.passed}});
    }
    const auto* worst = report.worst();
    write_json(out / "grad_check.json", {{"passed", report.passed()},
                                         {"tolerance", a.tolerance},
                                         {"step", a.step},
                                         {"max_rel_error", worst ? worst->max_rel_error : 0.0},
                                         {"worst_parameter", worst ? worst->name : ""},
                                         {"parameters", entries}});
    spdlog::info("gradient check {} in {:.1f}s: max relative error {:.3e} ({})", report.passed() ? "passed" : "FAILED",
                 seconds, worst ? worst->max_rel_error : 0.0, worst ? worst->name : "-");
    if (!report.passed()) spdlog::error("{}", report.summary());
    return report.passed();
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("fraudfuse");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::cfg::load_env_levels();

    CLI::App app{"Account-level fraud detection over transaction text and graph"};
    app.require_subcommand(1);
    app.footer("Exit codes: 0 ok, 1 usage or config error, 2 data error, 3 numeric error or failed gradient check.\n"
               "Log verbosity: SPDLOG_LEVEL=debug|info|warn|error.");

    Common common;
    GraphOptions graph_opts;
    ModelOptions model_opts;
    TrainOptions train_opts;
    SynthArgs synth_args;
    GradCheckArgs gc_args;
    std::string input, corpus_dir, checkpoint, split_name = "test";
    std::vector<double> split_ratios{0.8, 0.1, 0.1};
    std::vector<std::string> sweep_ratios;

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic transaction world");
    add_common(synth_cmd, common);
    {
        auto& s = synth_args.cfg;
        synth_cmd->add_option("--n-normal", s.n_normal, "Normal accounts")->capture_default_str();
        synth_cmd->add_option("--n-fraud", s.n_fraud, "Fraud accounts")->capture_default_str();
        synth_cmd->add_option("--normal-interarrival", s.normal.mean_interarrival, "Mean seconds between normal sends")
            ->capture_default_str();
        synth_cmd->add_option("--fraud-interarrival", s.fraud.mean_interarrival, "Mean seconds between fraud sends")
            ->capture_default_str();
        synth_cmd->add_option("--normal-fan-out", s.normal.fan_out, "Counterparties per normal account")->capture_default_str();
        synth_cmd->add_option("--fraud-fan-out", s.fraud.fan_out, "Counterparties per fraud account")->capture_default_str();
        synth_cmd->add_option("--normal-tx", s.normal.tx_per_account, "Sends per normal account")->capture_default_str();
        synth_cmd->add_option("--fraud-tx", s.fraud.tx_per_account, "Sends per fraud account")->capture_default_str();
        synth_cmd->add_option("--normal-value-mu", s.normal.value_mu, "Log-normal mu, normal")->capture_default_str();
        synth_cmd->add_option("--normal-value-sigma", s.normal.value_sigma, "Log-normal sigma, normal")->capture_default_str();
        synth_cmd->add_option("--fraud-value-mu", s.fraud.value_mu, "Log-normal mu, fraud")->capture_default_str();
        synth_cmd->add_option("--fraud-value-sigma", s.fraud.value_sigma, "Log-normal sigma, fraud")->capture_default_str();
        synth_cmd->add_option("--horizon", s.horizon, "Simulated seconds")->capture_default_str();
        synth_cmd->add_option("--start-time", s.start_time, "First possible timestamp")->capture_default_str();
        synth_cmd->add_option("--format", synth_args.format, "csv | jsonl")->capture_default_str();
    }

    auto* ingest_cmd = app.add_subcommand("ingest", "Parse and bucket transactions, write summary stats");
    add_common(ingest_cmd, common);
    ingest_cmd->add_option("--input", input, "Transactions (.csv or .jsonl)");
    ingest_cmd->add_option("--n-max", graph_opts.n_max, "Largest n-gram order")->capture_default_str();

    auto* graph_cmd = app.add_subcommand("build-graph", "Build and dump the weighted account graph");
    add_common(graph_cmd, common);
    graph_cmd->add_option("--input", input, "Transactions (.csv or .jsonl)");
    add_graph_options(graph_cmd, graph_opts);

    auto* corpus_cmd = app.add_subcommand("make-corpus", "Render account documents and write the stratified split");
    add_common(corpus_cmd, common);
    corpus_cmd->add_option("--input", input, "Transactions (.csv or .jsonl)");
    corpus_cmd->add_option("--n-max", graph_opts.n_max, "Largest n-gram order")->capture_default_str();
    corpus_cmd->add_option("--split", split_ratios, "Train dev test shares")->expected(3)->capture_default_str();

    auto* train_cmd = app.add_subcommand("train", "Train the fused model");
    add_common(train_cmd, common);
    train_cmd->add_option("--input", input, "Transactions (.csv or .jsonl)");
    train_cmd->add_option("--corpus-dir", corpus_dir, "Directory with Train/dev/test.tsv (default: out-dir)");
    add_graph_options(train_cmd, graph_opts);
    add_model_options(train_cmd, model_opts);
    add_train_options(train_cmd, train_opts);

    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on one split");
    add_common(eval_cmd, common);
    eval_cmd->add_option("--input", input, "Transactions (.csv or .jsonl)");
    eval_cmd->add_option("--corpus-dir", corpus_dir, "Directory with Train/dev/test.tsv (default: out-dir)");
    eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint (default: out-dir/checkpoint.cfck)");
    eval_cmd->add_option("--split", split_name, "train | dev | test")->capture_default_str();

    auto* sweep_cmd = app.add_subcommand("sweep-ratio", "Retrain under normal:fraud ratios 1:9 .. 9:1");
    add_common(sweep_cmd, common);
    sweep_cmd->add_option("--input", input, "Transactions (.csv or .jsonl)");
    sweep_cmd->add_option("--ratios", sweep_ratios, "Ratios like 5:5 (default: all nine)");
    add_graph_options(sweep_cmd, graph_opts);
    add_model_options(sweep_cmd, model_opts);
    add_train_options(sweep_cmd, train_opts);

    // Gradient checks default to a narrower model.
    ModelOptions gc_model;
    gc_model.cfg.encoder.d_model = 16;
    gc_model.cfg.encoder.d_ff = 64;
    gc_model.cfg.gcn.d_hidden = 16;
    gc_model.cfg.gcn.d_out = 16;
    gc_model.cfg.d_gate = 8;
    gc_model.cfg.encoder.max_len = 64;
    auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of every parameter's gradient");
    add_common(gc_cmd, common);
    gc_cmd->add_option("--input", input, "Transactions (default: a small synthetic world)");
    gc_cmd->add_option("--accounts", gc_args.accounts, "Accounts in the synthetic world")->capture_default_str();
    gc_cmd->add_option("--batch", gc_args.batch, "Accounts in the checked batch")->capture_default_str();
    gc_cmd->add_option("--coords", gc_args.coords, "Sampled coordinates per parameter")->capture_default_str();
    gc_cmd->add_option("--tolerance", gc_args.tolerance, "Max relative error")->capture_default_str();
    gc_cmd->add_option("--step", gc_args.step, "Central difference step")->capture_default_str();
    add_graph_options(gc_cmd, graph_opts);
    add_model_options(gc_cmd, gc_model);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (!common.config.empty()) apply_config_file(app, sub, common.config);
        const fs::path out = prepare_out_dir(common);
        log_resolved(sub, out);
        if (sub == synth_cmd) {
            run_synth(common, synth_args, out);
        } else if (sub == ingest_cmd) {
            run_ingest(input, graph_opts, out);
        } else if (sub == graph_cmd) {
            run_build_graph(input, graph_opts, out);
        } else if (sub == corpus_cmd) {
            run_make_corpus(common, input, graph_opts, split_ratios, out);
        } else if (sub == train_cmd) {
            run_train(common, input, corpus_dir, graph_opts, model_opts, train_opts, out);
        } else if (sub == eval_cmd) {
            run_evaluate(checkpoint, input, corpus_dir, split_name, out);
        } else if (sub == sweep_cmd) {
            run_sweep(common, input, graph_opts, model_opts, train_opts, sweep_ratios, out);
        } else if (sub == gc_cmd) {
            if (!run_grad_check(common, input, graph_opts, gc_model, gc_args, out)) return kExitNumeric;
        }
    } catch (const ConfigError& e) {
        spdlog::error("config error: {}", e.what());
        return kExitUsage;
    } catch (const NumericError& e) {
        spdlog::error("numeric error: {}", e.what());
        return kExitNumeric;
    } catch (const DataError& e) {
        spdlog::error("data error: {}", e.what());
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        spdlog::error("file error: {}", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        spdlog::error("error: {}", e.what());
        return kExitData;
    }
    return 0;
}
