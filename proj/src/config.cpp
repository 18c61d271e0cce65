#include "macc/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>

#include "macc/error.hpp"

namespace macc {

namespace {

using FieldPtr = std::variant<std::uint64_t*, double*, bool*, std::vector<double>*, std::vector<std::uint64_t>*>;

std::map<std::string, FieldPtr> fields(ExperimentConfig& c) {
    return {
        {"dataset.n_train", &c.dataset.n_train},
        {"dataset.n_val", &c.dataset.n_val},
        {"dataset.image_size", &c.dataset.image_size},
        {"dataset.n_band", &c.dataset.n_band},
        {"dataset.n_sca", &c.dataset.n_sca},
        {"dataset.d_in", &c.dataset.d_in},
        {"dataset.seed", &c.dataset.seed},
        {"wae.latent_dim", &c.wae.latent_dim},
        {"wae.gamma_s", &c.wae.gamma_s},
        {"wae.gamma_a", &c.wae.gamma_a},
        {"wae.epochs", &c.wae.epochs},
        {"wae.patience", &c.wae.patience},
        {"inverse.epochs", &c.inverse.epochs},
        {"inverse.patience", &c.inverse.patience},
        {"inverse.members", &c.inverse.members},
        {"inverse.fraction", &c.inverse.fraction},
        {"surrogate.lambda_cyc", &c.surrogate.lambda_cyc},
        {"surrogate.epochs", &c.surrogate.epochs},
        {"surrogate.patience", &c.surrogate.patience},
        {"surrogate.baseline", &c.surrogate.baseline},
        {"eval.sigma", &c.eval.sigma},
        {"eval.scan_bases", &c.eval.scan_bases},
        {"eval.scan_steps", &c.eval.scan_steps},
        {"eval.fractions", &c.eval.fractions},
        {"eval.sweep_lambdas", &c.eval.sweep_lambdas},
        {"eval.sweep_seeds", &c.eval.sweep_seeds},
        {"optimizer.learning_rate", &c.optimizer.learning_rate},
        {"optimizer.beta1", &c.optimizer.beta1},
        {"optimizer.beta2", &c.optimizer.beta2},
        {"optimizer.epsilon", &c.optimizer.epsilon},
        {"optimizer.batch_size", &c.optimizer.batch_size},
    };
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_f64(const std::string& s, double& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(trim(item));
    return out;
}

template <class T, class Parse>
bool parse_list(const std::string& s, std::vector<T>& out, Parse parse) {
    std::vector<T> v;
    for (auto& item : split_list(s)) {
        T x;
        if (!parse(item, x)) return false;
        v.push_back(x);
    }
    if (v.empty()) return false;
    out = std::move(v);
    return true;
}

std::string render(const FieldPtr& f) {
    struct {
        std::string operator()(std::uint64_t* p) const { return std::to_string(*p); }
        std::string operator()(double* p) const { return format_double(*p); }
        std::string operator()(bool* p) const { return *p ? "true" : "false"; }
        std::string operator()(std::vector<double>* p) const {
            std::string s;
            for (std::size_t i = 0; i < p->size(); ++i) s += (i ? "," : "") + format_double((*p)[i]);
            return s;
        }
        std::string operator()(std::vector<std::uint64_t>* p) const {
            std::string s;
            for (std::size_t i = 0; i < p->size(); ++i) s += (i ? "," : "") + std::to_string((*p)[i]);
            return s;
        }
    } visitor;
    return std::visit(visitor, f);
}

const char* type_name(const FieldPtr& f) {
    constexpr const char* names[] = {"unsigned integer", "number", "boolean", "list of numbers",
                                     "list of unsigned integers"};
    return names[f.index()];
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string ExperimentConfig::canonical() const {
    auto copy = *this;
    std::string out;
    for (const auto& [key, f] : fields(copy)) out += key + " = " + render(f) + "\n";
    return out;
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(canonical())); }

SimShape ExperimentConfig::sim_shape() const {
    SimShape s;
    s.d_in = dataset.d_in;
    s.n_band = dataset.n_band;
    s.height = dataset.image_size;
    s.width = dataset.image_size;
    s.n_sca = dataset.n_sca;
    return s;
}

ArchConfig ExperimentConfig::arch() const { return ArchConfig{sim_shape(), wae.latent_dim}; }

AdamConfig ExperimentConfig::adam() const {
    return AdamConfig{optimizer.learning_rate, optimizer.beta1, optimizer.beta2, optimizer.epsilon};
}

namespace {
TrainOptions options(const ExperimentConfig& c, std::uint64_t epochs, std::uint64_t patience) {
    TrainOptions o;
    o.epochs = static_cast<int>(epochs);
    o.patience = static_cast<int>(patience);
    o.batch_size = c.optimizer.batch_size;
    o.adam = c.adam();
    return o;
}
}  // namespace

TrainOptions ExperimentConfig::wae_options() const { return options(*this, wae.epochs, wae.patience); }
TrainOptions ExperimentConfig::inverse_options() const { return options(*this, inverse.epochs, inverse.patience); }
TrainOptions ExperimentConfig::surrogate_options() const {
    return options(*this, surrogate.epochs, surrogate.patience);
}

WaeConfig ExperimentConfig::wae_config() const { return WaeConfig{wae.gamma_s, wae.gamma_a, wae_options()}; }

ExperimentConfig parse_config_text(std::string_view text, const std::string& origin) {
    ExperimentConfig c;
    auto table = fields(c);
    std::map<std::string, int> seen;
    std::istringstream in{std::string(text)};
    std::string raw;
    for (int lineno = 1; std::getline(in, raw); ++lineno) {
        const auto where = origin + ":" + std::to_string(lineno) + ": ";
        auto line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const auto key = trim(std::string_view(line).substr(0, eq));
        const auto value = trim(std::string_view(line).substr(eq + 1));
        auto it = table.find(key);
        if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
        if (auto prev = seen.find(key); prev != seen.end()) {
            throw ConfigError(where + "duplicate key '" + key + "' (first set on line " +
                              std::to_string(prev->second) + ")");
        }
        seen[key] = lineno;
        bool ok = std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, std::uint64_t>) {
                    return parse_u64(value, *p);
                } else if constexpr (std::is_same_v<T, double>) {
                    return parse_f64(value, *p);
                } else if constexpr (std::is_same_v<T, bool>) {
                    if (value == "true" || value == "1") return *p = true, true;
                    if (value == "false" || value == "0") return *p = false, true;
                    return false;
                } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                    return parse_list(value, *p, parse_f64);
                } else {
                    return parse_list(value, *p, parse_u64);
                }
            },
            it->second);
        if (!ok) {
            throw ConfigError(where + "'" + key + "' expects a " + type_name(it->second) + ", got '" + value + "'");
        }
    }
    validate(c, origin);
    return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ":0: cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.string());
}

void validate(const ExperimentConfig& c, const std::string& origin) {
    auto fail = [&](const std::string& msg) { throw ConfigError(origin + ": " + msg); };
    auto positive = [&](std::uint64_t v, const char* key) {
        if (v == 0) fail(std::string(key) + " must be positive");
    };
    positive(c.dataset.n_train, "dataset.n_train");
    positive(c.dataset.n_val, "dataset.n_val");
    positive(c.dataset.n_band, "dataset.n_band");
    if (c.dataset.image_size == 0 || c.dataset.image_size % 16) fail("dataset.image_size must be a positive multiple of 16");
    if (c.dataset.d_in != 5) fail("dataset.d_in must be 5 for the built-in simulator");
    if (c.dataset.n_sca != c.dataset.n_band + 4) fail("dataset.n_sca must equal dataset.n_band + 4");
    positive(c.wae.latent_dim, "wae.latent_dim");
    if (!(c.wae.gamma_s > 0)) fail("wae.gamma_s must be > 0");
    if (!(c.wae.gamma_a > 0)) fail("wae.gamma_a must be > 0");
    positive(c.inverse.members, "inverse.members");
    if (!(c.inverse.fraction > 0 && c.inverse.fraction <= 1)) fail("inverse.fraction must lie in (0, 1]");
    if (!(c.surrogate.lambda_cyc >= 0)) fail("surrogate.lambda_cyc must be >= 0");
    if (!(c.eval.sigma >= 0)) fail("eval.sigma must be >= 0");
    positive(c.eval.scan_bases, "eval.scan_bases");
    if (c.eval.scan_steps < 2) fail("eval.scan_steps must be at least 2");
    for (double f : c.eval.fractions) {
        if (!(f > 0 && f <= 1)) fail("eval.fractions entries must lie in (0, 1]");
    }
    for (double l : c.eval.sweep_lambdas) {
        if (!(l >= 0)) fail("eval.sweep_lambdas entries must be >= 0");
    }
    if (!(c.optimizer.learning_rate > 0)) fail("optimizer.learning_rate must be > 0");
    if (!(c.optimizer.beta1 >= 0 && c.optimizer.beta1 < 1)) fail("optimizer.beta1 must lie in [0, 1)");
    if (!(c.optimizer.beta2 >= 0 && c.optimizer.beta2 < 1)) fail("optimizer.beta2 must lie in [0, 1)");
    if (!(c.optimizer.epsilon > 0)) fail("optimizer.epsilon must be > 0");
    positive(c.optimizer.batch_size, "optimizer.batch_size");
    for (auto v : {c.wae.epochs, c.inverse.epochs, c.surrogate.epochs, c.wae.patience, c.inverse.patience,
                   c.surrogate.patience}) {
        if (v > 1000000) fail("epoch and patience counts must not exceed 1000000");
    }
}

}  // namespace macc
