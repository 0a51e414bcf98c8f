#include "fraudfuse/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

#include <json.hpp>

#include "fraudfuse/errors.hpp"
#include "fraudfuse/numcore/random.hpp"

namespace fraudfuse::synth {

namespace {

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.8f", v);
    return buf;
}

std::string random_address(nc::Rng& rng) {
    static const char* hex = "0123456789abcdef";
    std::string s = "0x";
    for (int i = 0; i < 40; ++i) s += hex[rng.below(16)];
    return s;
}

void validate_behavior(const ClassBehavior& b, const char* name) {
    const std::string who = name;
    if (!(b.mean_interarrival > 0.0)) throw ConfigError(who + " mean inter-arrival must be > 0");
    if (b.fan_out == 0) throw ConfigError(who + " fan-out must be >= 1");
    if (b.tx_per_account == 0) throw ConfigError(who + " transactions per account must be >= 1");
    if (!(b.value_sigma >= 0.0) || !std::isfinite(b.value_mu)) throw ConfigError(who + " value parameters invalid");
}

}  // namespace

void SynthConfig::validate() const {
    if (n_normal < 1) throw ConfigError("n_normal must be >= 1");
    if (n_fraud < 1) throw ConfigError("n_fraud must be >= 1");
    if (horizon <= 0) throw ConfigError("horizon must be > 0");
    if (start_time < 0) throw ConfigError("start_time must be >= 0");
    validate_behavior(normal, "normal");
    validate_behavior(fraud, "fraud");
}

SynthWorld generate(const SynthConfig& cfg) {
    cfg.validate();
    nc::Rng addr_rng(cfg.seed, "addresses");
    std::set<std::string> used;
    auto fresh = [&] {
        std::string a;
        do a = random_address(addr_rng);
        while (!used.insert(a).second);
        return a;
    };
    std::vector<std::string> normals(cfg.n_normal), frauds(cfg.n_fraud);
    for (auto& a : normals) a = fresh();
    for (auto& a : frauds) a = fresh();

    SynthWorld world;
    for (const auto& a : normals) world.labels[a] = 0;
    for (const auto& a : frauds) world.labels[a] = 1;

    nc::Rng rng(cfg.seed, "transactions");
    auto emit = [&](const std::vector<std::string>& group, const ClassBehavior& beh, int tag) {
        for (std::size_t i = 0; i < group.size(); ++i) {
            // Counterparties from the same class, excluding self unless alone.
            std::vector<std::string> peers;
            if (group.size() == 1) {
                peers.push_back(group[0]);
            } else {
                const std::size_t want = std::min(beh.fan_out, group.size() - 1);
                std::set<std::size_t> picked;
                while (picked.size() < want) {
                    const auto j = static_cast<std::size_t>(rng.below(group.size()));
                    if (j != i) picked.insert(j);
                }
                for (std::size_t j : picked) peers.push_back(group[j]);
                rng.shuffle(std::span<std::string>(peers));
            }
            double t = rng.uniform(0.0, static_cast<double>(cfg.horizon));
            for (std::size_t k = 0; k < beh.tx_per_account; ++k) {
                if (k > 0) t += rng.exponential(beh.mean_interarrival);
                const double raw = std::exp(beh.value_mu + beh.value_sigma * rng.normal());
                txdata::TransactionRecord r;
                r.tag = tag;
                r.from_address = group[i];
                r.to_address = peers[k % peers.size()];
                r.value = std::strtod(format_value(raw).c_str(), nullptr);
                r.timestamp = cfg.start_time + static_cast<std::int64_t>(std::floor(t));
                world.records.push_back(std::move(r));
            }
        }
    };
    emit(normals, cfg.normal, 0);
    emit(frauds, cfg.fraud, 1);
    std::stable_sort(world.records.begin(), world.records.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    return world;
}

void write_csv(std::ostream& out, const std::vector<txdata::TransactionRecord>& records) {
    out << "tag,from_address,to_address,value,timestamp\n";
    for (const auto& r : records) {
        out << r.tag << ',' << r.from_address << ',' << r.to_address << ',' << format_value(r.value) << ','
            << r.timestamp << '\n';
    }
}

void write_jsonl(std::ostream& out, const std::vector<txdata::TransactionRecord>& records) {
    for (const auto& r : records) {
        // Value as a string keeps the exact 8-decimal text.
        nlohmann::ordered_json j{{"tag", r.tag},
                                 {"from_address", r.from_address},
                                 {"to_address", r.to_address},
                                 {"value", format_value(r.value)},
                                 {"timestamp", r.timestamp}};
        out << j.dump() << '\n';
    }
}

void write_ground_truth(std::ostream& out, const std::map<std::string, int>& labels) {
    out << "address,label\n";
    for (const auto& [addr, label] : labels) out << addr << ',' << label << '\n';
}

}  // namespace fraudfuse::synth
