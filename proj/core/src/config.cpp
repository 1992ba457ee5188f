#include "fedsim/config.hpp"

#include "fedsim/errors.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace fedsim {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

struct KeyValue {
    std::string key;
    std::string value;
    int line = 0;
};

// key = value, '#' comments (outside quotes), blank lines skipped.
std::vector<KeyValue> tokenize(const std::string& text) {
    std::vector<KeyValue> out;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string stripped;
        bool quoted = false;
        for (char ch : raw) {
            if (ch == '"') quoted = !quoted;
            if (ch == '#' && !quoted) break;
            stripped += ch;
        }
        const std::string body = trim(stripped);
        if (body.empty()) continue;
        const std::size_t eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("parse_config: line " + std::to_string(line) +
                              ": expected key = value");
        KeyValue kv;
        kv.key = trim(std::string_view(body).substr(0, eq));
        kv.value = trim(std::string_view(body).substr(eq + 1));
        kv.line = line;
        if (kv.key.empty())
            throw ConfigError("parse_config: line " + std::to_string(line) + ": empty key");
        if (kv.value.size() >= 2 && kv.value.front() == '"' && kv.value.back() == '"')
            kv.value = kv.value.substr(1, kv.value.size() - 2);
        out.push_back(std::move(kv));
    }
    return out;
}

[[noreturn]] void bad_value(const KeyValue& kv, const std::string& want) {
    throw ConfigError("parse_config: line " + std::to_string(kv.line) + ": key '" + kv.key +
                      "': expected " + want + ", got '" + kv.value + "'");
}

std::uint64_t parse_u64(const KeyValue& kv) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(kv.value.data(), kv.value.data() + kv.value.size(), v);
    if (res.ec != std::errc() || res.ptr != kv.value.data() + kv.value.size())
        bad_value(kv, "an unsigned integer");
    return v;
}

int parse_int(const KeyValue& kv) {
    int v = 0;
    const auto res = std::from_chars(kv.value.data(), kv.value.data() + kv.value.size(), v);
    if (res.ec != std::errc() || res.ptr != kv.value.data() + kv.value.size())
        bad_value(kv, "an integer");
    return v;
}

double parse_double(const KeyValue& kv) {
    double v = 0.0;
    const auto res = std::from_chars(kv.value.data(), kv.value.data() + kv.value.size(), v);
    if (res.ec != std::errc() || res.ptr != kv.value.data() + kv.value.size())
        bad_value(kv, "a number");
    return v;
}

bool parse_bool(const KeyValue& kv) {
    if (kv.value == "true") return true;
    if (kv.value == "false") return false;
    bad_value(kv, "true or false");
}

std::vector<std::size_t> parse_dims(const KeyValue& kv) {
    std::vector<std::size_t> dims;
    if (kv.value.empty()) return dims;
    std::size_t pos = 0;
    while (pos <= kv.value.size()) {
        const std::size_t comma = kv.value.find(',', pos);
        const std::string item = trim(std::string_view(kv.value).substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos));
        std::size_t v = 0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size() || v == 0)
            bad_value(kv, "a comma-separated list of positive layer widths");
        dims.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return dims;
}

std::string canon(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) throw FormatError("print_config: double conversion failed");
    return std::string(buf, res.ptr);
}

} // namespace

void ExperimentConfig::validate() const {
    if (num_clients < 1) throw ConfigError("ExperimentConfig: num_clients must be >= 1");
    if (fraction < 0.0 || fraction > 1.0)
        throw ConfigError("ExperimentConfig: fraction must be in [0, 1]");
    if (client_epochs < 1) throw ConfigError("ExperimentConfig: client_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("ExperimentConfig: batch_size must be >= 1");
    if (global_rounds < 1) throw ConfigError("ExperimentConfig: global_rounds must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("ExperimentConfig: learning_rate must be finite and >= 0");
    bwo.validate();
    stop.validate();
    if (data.source == DataSource::cifar10 && data.cifar_dir.empty())
        throw ConfigError("ExperimentConfig: data.cifar_dir is required when data.source = cifar10");
    const SyntheticSpec& syn = data.synthetic;
    if (syn.d < 1) throw ConfigError("ExperimentConfig: data.synthetic.d must be >= 1");
    if (syn.classes < 2) throw ConfigError("ExperimentConfig: data.synthetic.classes must be >= 2");
    if (syn.n < static_cast<std::size_t>(syn.classes))
        throw ConfigError("ExperimentConfig: data.synthetic.n must be >= data.synthetic.classes");
    if (syn.test_n < 1) throw ConfigError("ExperimentConfig: data.synthetic.test_n must be >= 1");
    if (!(syn.separation > 0.0))
        throw ConfigError("ExperimentConfig: data.synthetic.separation must be > 0");
}

std::vector<LayerSpec> ExperimentConfig::architecture(std::size_t input_dim, int classes) const {
    if (input_dim < 1) throw ConfigError("ExperimentConfig: input dimension must be >= 1");
    if (classes < 2) throw ConfigError("ExperimentConfig: need at least 2 classes");
    std::vector<LayerSpec> arch;
    std::size_t prev = input_dim;
    for (std::size_t h : hidden) {
        arch.push_back(LayerSpec{prev, h, Activation::relu});
        prev = h;
    }
    arch.push_back(LayerSpec{prev, static_cast<std::size_t>(classes), Activation::identity});
    return arch;
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    for (const KeyValue& kv : tokenize(text)) {
        const std::string& k = kv.key;
        if (k == "seed") cfg.seed = parse_u64(kv);
        else if (k == "num_clients") cfg.num_clients = static_cast<std::size_t>(parse_u64(kv));
        else if (k == "fraction") cfg.fraction = parse_double(kv);
        else if (k == "client_epochs") cfg.client_epochs = static_cast<std::size_t>(parse_u64(kv));
        else if (k == "batch_size") cfg.batch_size = static_cast<std::size_t>(parse_u64(kv));
        else if (k == "global_rounds") cfg.global_rounds = parse_int(kv);
        else if (k == "learning_rate") cfg.learning_rate = parse_double(kv);
        else if (k == "strategy") {
            try {
                cfg.strategy = strategy_from_name(kv.value);
            } catch (const ConfigError&) {
                bad_value(kv, "fedavg, fedbwo, or hillclimb");
            }
        } else if (k == "client.refiner") {
            try {
                cfg.client_refiner = refiner_from_name(kv.value);
            } catch (const ConfigError&) {
                bad_value(kv, "sgd+bwo, sgd, or bwo");
            }
        } else if (k == "score_metric") {
            try {
                cfg.score_metric = score_metric_from_name(kv.value);
            } catch (const ConfigError&) {
                bad_value(kv, "loss or accuracy");
            }
        } else if (k == "epsilon") cfg.epsilon = parse_u64(kv);
        else if (k == "parallel_clients") cfg.parallel_clients = parse_bool(kv);
        else if (k == "model.hidden") cfg.hidden = parse_dims(kv);
        else if (k == "bwo.population") cfg.bwo.population_size = parse_int(kv);
        else if (k == "bwo.max_iterations") cfg.bwo.max_iterations = parse_int(kv);
        else if (k == "bwo.Pm") cfg.bwo.mutation_rate = parse_double(kv);
        else if (k == "bwo.Pc") cfg.bwo.cannibalism_rate = parse_double(kv);
        else if (k == "bwo.sigma") cfg.bwo.mutation_scale = parse_double(kv);
        else if (k == "bwo.init_spread") cfg.bwo.init_spread = parse_double(kv);
        else if (k == "stop.t") cfg.stop.patience = parse_int(kv);
        else if (k == "stop.tau") cfg.stop.accuracy_threshold = parse_double(kv);
        else if (k == "stop.min_delta") cfg.stop.min_delta = parse_double(kv);
        else if (k == "data.source") {
            if (kv.value == "synthetic") cfg.data.source = DataSource::synthetic;
            else if (kv.value == "cifar10") cfg.data.source = DataSource::cifar10;
            else bad_value(kv, "synthetic or cifar10");
        } else if (k == "data.cifar_dir") cfg.data.cifar_dir = kv.value;
        else if (k == "data.synthetic.n") cfg.data.synthetic.n = static_cast<std::size_t>(parse_u64(kv));
        else if (k == "data.synthetic.d") cfg.data.synthetic.d = static_cast<std::size_t>(parse_u64(kv));
        else if (k == "data.synthetic.classes") cfg.data.synthetic.classes = parse_int(kv);
        else if (k == "data.synthetic.separation") cfg.data.synthetic.separation = parse_double(kv);
        else if (k == "data.synthetic.test_n") cfg.data.synthetic.test_n = static_cast<std::size_t>(parse_u64(kv));
        else if (k == "output.csv") cfg.output.csv = parse_bool(kv);
        else if (k == "output.scores") cfg.output.scores = parse_bool(kv);
        else
            throw ConfigError("parse_config: line " + std::to_string(kv.line) + ": unknown key '" +
                              k + "'");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("load_config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string print_config(const ExperimentConfig& c) {
    std::string hidden;
    for (std::size_t i = 0; i < c.hidden.size(); ++i) {
        if (i) hidden += ',';
        hidden += std::to_string(c.hidden[i]);
    }
    std::string out;
    out += "seed = " + std::to_string(c.seed) + "\n";
    out += "num_clients = " + std::to_string(c.num_clients) + "\n";
    out += "fraction = " + canon(c.fraction) + "\n";
    out += "client_epochs = " + std::to_string(c.client_epochs) + "\n";
    out += "batch_size = " + std::to_string(c.batch_size) + "\n";
    out += "global_rounds = " + std::to_string(c.global_rounds) + "\n";
    out += "learning_rate = " + canon(c.learning_rate) + "\n";
    out += "strategy = \"" + strategy_name(c.strategy) + "\"\n";
    out += "client.refiner = \"" + refiner_name(c.client_refiner) + "\"\n";
    out += "score_metric = \"" + score_metric_name(c.score_metric) + "\"\n";
    out += "epsilon = " + std::to_string(c.epsilon) + "\n";
    out += "parallel_clients = " + std::string(c.parallel_clients ? "true" : "false") + "\n";
    out += "model.hidden = \"" + hidden + "\"\n";
    out += "bwo.population = " + std::to_string(c.bwo.population_size) + "\n";
    out += "bwo.max_iterations = " + std::to_string(c.bwo.max_iterations) + "\n";
    out += "bwo.Pm = " + canon(c.bwo.mutation_rate) + "\n";
    out += "bwo.Pc = " + canon(c.bwo.cannibalism_rate) + "\n";
    out += "bwo.sigma = " + canon(c.bwo.mutation_scale) + "\n";
    out += "bwo.init_spread = " + canon(c.bwo.init_spread) + "\n";
    out += "stop.t = " + std::to_string(c.stop.patience) + "\n";
    out += "stop.tau = " + canon(c.stop.accuracy_threshold) + "\n";
    out += "stop.min_delta = " + canon(c.stop.min_delta) + "\n";
    out += "data.source = \"" +
           std::string(c.data.source == DataSource::synthetic ? "synthetic" : "cifar10") + "\"\n";
    out += "data.cifar_dir = \"" + c.data.cifar_dir + "\"\n";
    out += "data.synthetic.n = " + std::to_string(c.data.synthetic.n) + "\n";
    out += "data.synthetic.d = " + std::to_string(c.data.synthetic.d) + "\n";
    out += "data.synthetic.classes = " + std::to_string(c.data.synthetic.classes) + "\n";
    out += "data.synthetic.separation = " + canon(c.data.synthetic.separation) + "\n";
    out += "data.synthetic.test_n = " + std::to_string(c.data.synthetic.test_n) + "\n";
    out += "output.csv = " + std::string(c.output.csv ? "true" : "false") + "\n";
    out += "output.scores = " + std::string(c.output.scores ? "true" : "false") + "\n";
    return out;
}

} // namespace fedsim
