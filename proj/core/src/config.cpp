#include "safepatch/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "safepatch/error.hpp"

namespace safepatch {

namespace {

enum class Kind { Int, U64, Double, Str, Bool, IntList, U64List };

struct SchemaEntry {
    Kind kind;
    const char* def;
    const char* choices = nullptr;  // '|'-separated for Str
};

const std::map<std::string, SchemaEntry>& schema() {
    static const std::map<std::string, SchemaEntry> s = {
        {"seed", {Kind::U64, "1"}},
        {"threads", {Kind::Int, "0"}},  // 0 = SAFEPATCH_THREADS or hardware
        {"precision", {Kind::Str, "f64", "f64|f32"}},

        {"schedule.steps", {Kind::Int, "100"}},
        {"schedule.beta_start", {Kind::Double, "0.0001"}},
        {"schedule.beta_end", {Kind::Double, "0.02"}},

        {"base.corpus", {Kind::Str, ""}},
        {"base.corpus_size", {Kind::Int, "2000"}},
        {"base.steps", {Kind::Int, "10000"}},
        {"base.batch", {Kind::Int, "8"}},
        {"base.lr", {Kind::Double, "0.002"}},
        {"base.eval_every", {Kind::Int, "500"}},
        {"base.out", {Kind::Str, "base.spc"}},
        {"base.path", {Kind::Str, "base.spc"}},

        {"data.kind", {Kind::Str, "pairs", "pairs|benign|base"}},
        {"data.category", {Kind::Str, "blob", "blob|spikes"}},
        {"data.size", {Kind::Int, "500"}},
        {"data.prompt_pool", {Kind::Int, "64"}},
        {"data.out", {Kind::Str, "dataset.txt"}},
        {"data.manifest_out", {Kind::Str, "manifest.txt"}},
        {"data.candidates", {Kind::Int, "4"}},
        {"data.images_per_candidate", {Kind::Int, "4"}},
        {"data.raised_threshold", {Kind::Double, "0.3"}},
        {"data.max_retries", {Kind::Int, "5"}},
        {"data.source", {Kind::Str, "renderer", "renderer|model"}},
        {"data.rewriter_cmd", {Kind::Str, ""}},

        {"patch.category", {Kind::Str, "blob", "blob|spikes"}},
        {"patch.dataset", {Kind::Str, "dataset.txt"}},
        {"patch.benign_dataset", {Kind::Str, ""}},
        {"patch.steps", {Kind::Int, "3000"}},
        {"patch.batch", {Kind::Int, "4"}},
        {"patch.lr", {Kind::Double, "0.001"}},
        {"patch.benign_mix", {Kind::Double, "0.3"}},
        {"patch.eval_every", {Kind::Int, "0"}},
        {"patch.out", {Kind::Str, "Safe-Control_blob.spc"}},

        {"sample.count", {Kind::Int, "1"}},
        {"sample.prompt", {Kind::Str, ""}},

        {"eval.panel", {Kind::Str, ""}},
        {"eval.out", {Kind::Str, "report"}},
        {"eval.threshold_center", {Kind::Double, "0.5"}},
        {"eval.threshold_correl", {Kind::Double, "0.5"}},

        {"panel.seeds", {Kind::U64List, "101 102 103 104"}},
        {"panel.unsafe_category", {Kind::Str, "blob", "blob|spikes|none"}},
        {"panel.unsafe_count", {Kind::Int, "50"}},
        {"panel.benign_count", {Kind::Int, "0"}},

        {"sweep.sizes", {Kind::IntList, "100 500 1000"}},
        {"sweep.seeds", {Kind::U64List, "11 12 13"}},
        {"sweep.budget", {Kind::Int, "3000"}},
        {"sweep.eval_every", {Kind::Int, "50"}},
        {"sweep.target", {Kind::Double, "0.40"}},
        {"sweep.batch", {Kind::Int, "4"}},
        {"sweep.lr", {Kind::Double, "0.0003"}},
        {"sweep.benign_mix", {Kind::Double, "0.3"}},
        {"sweep.category", {Kind::Str, "blob", "blob|spikes"}},
        {"sweep.stop_at_target", {Kind::Bool, "1"}},
        {"sweep.panel_count", {Kind::Int, "24"}},
        {"sweep.panel_seeds", {Kind::U64List, "301"}},
        {"sweep.benign_pool", {Kind::Int, "64"}},
        {"sweep.out", {Kind::Str, "sweep"}},
    };
    return s;
}

void check_value(const std::string& key, const SchemaEntry& entry, const std::string& value) {
    auto fail = [&](const std::string& why) {
        throw InvalidConfigError("config: key '" + key + "': " + why + " (value '" + value + "')");
    };
    auto parse_one = [&](const std::string& tok, bool unsigned_only) {
        if (tok.empty()) fail("empty number");
        int64_t v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size()) fail("not an integer");
        if (unsigned_only && v < 0) fail("must be non-negative");
    };
    switch (entry.kind) {
        case Kind::Int:
            parse_one(value, false);
            break;
        case Kind::U64:
            parse_one(value, true);
            break;
        case Kind::Double: {
            try {
                size_t used = 0;
                (void)std::stod(value, &used);
                if (used != value.size()) fail("not a number");
            } catch (...) {
                fail("not a number");
            }
            break;
        }
        case Kind::Bool:
            if (value != "0" && value != "1") fail("must be 0 or 1");
            break;
        case Kind::Str:
            if (entry.choices) {
                std::string choices(entry.choices);
                bool ok = false;
                size_t start = 0;
                for (size_t i = 0; i <= choices.size(); ++i) {
                    if (i == choices.size() || choices[i] == '|') {
                        if (choices.substr(start, i - start) == value) ok = true;
                        start = i + 1;
                    }
                }
                if (!ok) fail("must be one of " + choices);
            }
            break;
        case Kind::IntList:
        case Kind::U64List: {
            std::istringstream is(value);
            std::string tok;
            int n = 0;
            while (is >> tok) {
                parse_one(tok, entry.kind == Kind::U64List);
                ++n;
            }
            if (n == 0) fail("empty list");
            break;
        }
    }
}

} // namespace

RunConfig::RunConfig() {
    for (const auto& [key, entry] : schema()) values_[key] = entry.def;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw InvalidConfigError("config: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return from_string(os.str());
}

RunConfig RunConfig::from_string(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.pop_back();
        size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        line = line.substr(start);
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfigError("config: line " + std::to_string(lineno) + " has no '='");
        cfg.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = schema().find(key);
    if (it == schema().end())
        throw InvalidConfigError("config: unknown key '" + key + "'");
    check_value(key, it->second, value);
    values_[key] = value;
    explicit_[key] = true;
}

bool RunConfig::is_set(const std::string& key) const {
    auto it = explicit_.find(key);
    return it != explicit_.end() && it->second;
}

int64_t RunConfig::get_int(const std::string& key) const {
    return std::stoll(get_str(key));
}

uint64_t RunConfig::get_u64(const std::string& key) const {
    return std::stoull(get_str(key));
}

double RunConfig::get_double(const std::string& key) const {
    return std::stod(get_str(key));
}

const std::string& RunConfig::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
        throw InvalidConfigError("config: unknown key '" + key + "'");
    return it->second;
}

bool RunConfig::get_bool(const std::string& key) const {
    return get_str(key) == "1";
}

std::vector<int64_t> RunConfig::get_int_list(const std::string& key) const {
    std::istringstream is(get_str(key));
    std::vector<int64_t> out;
    int64_t v;
    while (is >> v) out.push_back(v);
    return out;
}

std::vector<uint64_t> RunConfig::get_u64_list(const std::string& key) const {
    std::istringstream is(get_str(key));
    std::vector<uint64_t> out;
    uint64_t v;
    while (is >> v) out.push_back(v);
    return out;
}

std::string RunConfig::dump() const {
    std::ostringstream os;
    for (const auto& [key, value] : values_) os << key << "=" << value << "\n";
    return os.str();
}

} // namespace safepatch
