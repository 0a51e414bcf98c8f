#include "fraudfuse/txdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string_view>

#include <json.hpp>

#include "fraudfuse/errors.hpp"

namespace fraudfuse::txdata {

namespace {

constexpr std::string_view kHeader = "tag,from_address,to_address,value,timestamp";

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

int parse_tag(std::string_view s, std::size_t row) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw ParseError(row, "tag", "expected 0 or 1, got '" + std::string(s) + "'");
}

double parse_value(std::string_view s, std::size_t row) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ParseError(row, "value", "not a decimal number: '" + std::string(s) + "'");
    }
    if (v < 0.0) throw ParseError(row, "value", "negative value rejected: " + std::string(s));
    return v;
}

std::int64_t parse_timestamp(std::string_view s, std::size_t row) {
    std::int64_t t = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), t);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(row, "timestamp", "not an integer: '" + std::string(s) + "'");
    }
    if (t < 0) throw ParseError(row, "timestamp", "negative timestamp");
    return t;
}

std::string parse_address(std::string_view s, std::size_t row, const char* field) {
    if (s.empty()) throw ParseError(row, field, "empty address");
    return std::string(s);
}

TransactionRecord parse_csv_row(std::string_view line, std::size_t row) {
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cols.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    static const char* names[] = {"tag", "from_address", "to_address", "value", "timestamp"};
    if (cols.size() != 5) {
        const std::size_t missing = std::min<std::size_t>(cols.size(), 4);
        throw ParseError(row, cols.size() < 5 ? names[missing] : "timestamp",
                         "expected 5 columns, got " + std::to_string(cols.size()));
    }
    TransactionRecord r;
    r.tag = parse_tag(cols[0], row);
    r.from_address = parse_address(cols[1], row, "from_address");
    r.to_address = parse_address(cols[2], row, "to_address");
    r.value = parse_value(cols[3], row);
    r.timestamp = parse_timestamp(cols[4], row);
    return r;
}

std::string json_scalar_text(const nlohmann::json& obj, const char* key, std::size_t row) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(row, key, "missing field");
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer() || it->is_number_unsigned()) return it->dump();
    if (it->is_number_float()) {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof buf, it->get<double>());
        return std::string(buf, res.ptr);
    }
    throw ParseError(row, key, "unsupported JSON type");
}

TransactionRecord parse_json_row(std::string_view line, std::size_t row) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(row, "<line>", std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(row, "<line>", "expected a JSON object");
    TransactionRecord r;
    r.tag = parse_tag(json_scalar_text(obj, "tag", row), row);
    r.from_address = parse_address(json_scalar_text(obj, "from_address", row), row, "from_address");
    r.to_address = parse_address(json_scalar_text(obj, "to_address", row), row, "to_address");
    r.value = parse_value(json_scalar_text(obj, "value", row), row);
    r.timestamp = parse_timestamp(json_scalar_text(obj, "timestamp", row), row);
    return r;
}

}  // namespace

Format format_from_path(const std::string& path) {
    auto ends_with = [&](std::string_view suffix) {
        return path.size() >= suffix.size() &&
               std::string_view(path).substr(path.size() - suffix.size()) == suffix;
    };
    if (ends_with(".csv")) return Format::Csv;
    if (ends_with(".jsonl") || ends_with(".json")) return Format::Jsonl;
    throw ConfigError("cannot infer input format from '" + path + "'; use --format");
}

std::vector<TransactionRecord> parse_records(std::istream& in, Format format) {
    std::vector<TransactionRecord> out;
    std::string line;
    bool header_seen = format == Format::Jsonl;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        const auto body = trim(line);
        if (body.empty()) continue;
        if (!header_seen) {
            if (body != kHeader) {
                throw ParseError(0, "<header>", "expected header '" + std::string(kHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        ++row;
        out.push_back(format == Format::Csv ? parse_csv_row(body, row) : parse_json_row(body, row));
    }
    return out;
}

BucketMap bucket_accounts(const std::vector<TransactionRecord>& records) {
    BucketMap buckets;
    auto bucket_for = [&](const std::string& addr) -> AccountBucket& {
        auto [it, inserted] = buckets.try_emplace(addr);
        if (inserted) it->second.address = addr;
        return it->second;
    };
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        bucket_for(r.from_address).records.push_back({r, Direction::Outgoing, i});
        bucket_for(r.to_address).records.push_back({r, Direction::Incoming, i});
    }
    for (auto& [addr, b] : buckets) {
        std::stable_sort(b.records.begin(), b.records.end(),
                         [](const DirectedRecord& x, const DirectedRecord& y) {
                             return x.base.timestamp < y.base.timestamp;
                         });
    }
    return buckets;
}

void compute_ngram_diffs(AccountBucket& bucket, int n_max) {
    if (n_max < 2) throw ConfigError("n_max must be >= 2");
    const auto& recs = bucket.records;
    for (std::size_t i = 1; i < recs.size(); ++i) {
        if (recs[i].base.timestamp < recs[i - 1].base.timestamp) {
            throw DataError("bucket " + bucket.address + " is not sorted by timestamp at record " +
                            std::to_string(i));
        }
    }
    bucket.ngram_diffs.assign(recs.size(), NgramDiffs{});
    for (std::size_t i = 0; i < recs.size(); ++i) {
        auto& d = bucket.ngram_diffs[i].by_n;
        d.assign(static_cast<std::size_t>(n_max - 1), 0);
        for (int n = 2; n <= n_max; ++n) {
            const auto back = static_cast<std::size_t>(n - 1);
            if (i >= back) d[n - 2] = recs[i].base.timestamp - recs[i - back].base.timestamp;
        }
    }
}

void assign_labels(BucketMap& buckets) {
    for (auto& [addr, b] : buckets) {
        b.label = std::any_of(b.records.begin(), b.records.end(),
                              [](const DirectedRecord& r) { return r.base.tag == 1; })
                      ? 1
                      : 0;
    }
}

BucketMap build_buckets(const std::vector<TransactionRecord>& records, int n_max) {
    auto buckets = bucket_accounts(records);
    for (auto& [addr, b] : buckets) compute_ngram_diffs(b, n_max);
    assign_labels(buckets);
    return buckets;
}

}  // namespace fraudfuse::txdata
