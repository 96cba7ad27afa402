#include "bnlab/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "bnlab/error.hpp"
#include "bnlab/harness/csv.hpp"

namespace bnlab::harness {

const std::vector<std::string_view>& instrument_names() {
    static const std::vector<std::string_view> names{"moments",      "coherence",    "histogram",
                                                     "class_heatmap", "channel_grads", "channel_matrix",
                                                     "mean_vs_grad",  "probe_loss",   "classwise_mask"};
    return names;
}

std::vector<double> ExperimentConfig::learning_rates() const {
    return lr_sweep.empty() ? std::vector<double>{base_lr} : lr_sweep;
}

void ExperimentConfig::set_seed(std::uint64_t value) {
    seed = value;
    if (!dataset.seed_pinned) dataset.synth.seed = value;
}

void ExperimentConfig::validate() const {
    network.validate();
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    for (double lr : learning_rates())
        if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rates must be positive");
    const auto& f = divergence_fractions;
    if (f.empty() || f.front() != 0.0 || f.back() != 1.0 || !std::is_sorted(f.begin(), f.end()))
        throw ConfigError("divergence fractions must ascend from 0 to 1");
    if (dataset.kind == DatasetKind::synthetic && shape_size(dataset.synth.image) < dataset.synth.classes)
        throw ConfigError("synthetic image too small for the class count");
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = v.find(',', start);
        out.push_back(trim(std::string_view(v).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

struct Field {
    std::size_t line;
    std::string key;
    std::string value;

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(line, key, what); }

    std::uint64_t as_u64(const std::string& s) const {
        std::uint64_t v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
            fail("expected a non-negative integer, got '" + s + "'");
        return v;
    }
    std::size_t as_size() const { return static_cast<std::size_t>(as_u64(value)); }
    std::size_t as_positive() const {
        const std::size_t v = as_size();
        if (v == 0) fail("must be positive");
        return v;
    }
    double as_double(const std::string& s) const {
        double v = 0.0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
            fail("expected a finite number, got '" + s + "'");
        return v;
    }
    double as_double() const { return as_double(value); }
    double as_positive_double() const {
        const double v = as_double();
        if (!(v > 0.0)) fail("must be positive");
        return v;
    }
    bool as_bool() const {
        if (value == "true" || value == "on" || value == "1") return true;
        if (value == "false" || value == "off" || value == "0") return false;
        fail("expected true or false, got '" + value + "'");
    }
    std::vector<double> as_doubles() const {
        std::vector<double> out;
        for (const auto& s : split_list(value)) out.push_back(as_double(s));
        return out;
    }
    std::vector<std::size_t> as_sizes() const {
        std::vector<std::size_t> out;
        for (const auto& s : split_list(value)) out.push_back(static_cast<std::size_t>(as_u64(s)));
        return out;
    }
    template <class F>
    auto named(F parse) const {
        try {
            return parse(value);
        } catch (const Error& e) {
            fail(e.what());
        }
    }
};

using Setter = std::function<void(ExperimentConfig&, const Field&)>;

std::map<std::string, Setter, std::less<>> make_setters() {
    std::map<std::string, Setter, std::less<>> s;
    s["seed"] = [](auto& c, const Field& f) { c.seed = f.as_u64(f.value); };
    s["dataset"] = [](auto& c, const Field& f) {
        if (f.value == "synthetic")
            c.dataset.kind = DatasetKind::synthetic;
        else if (f.value == "cifar10")
            c.dataset.kind = DatasetKind::cifar10;
        else
            f.fail("expected synthetic or cifar10");
    };
    s["dataset.path"] = [](auto& c, const Field& f) { c.dataset.path = f.value; };
    s["dataset.classes"] = [](auto& c, const Field& f) {
        c.dataset.synth.classes = f.as_size();
        if (c.dataset.synth.classes < 2) f.fail("need at least two classes");
    };
    s["dataset.per_class"] = [](auto& c, const Field& f) { c.dataset.synth.per_class = f.as_positive(); };
    s["dataset.test_per_class"] = [](auto& c, const Field& f) { c.dataset.synth.test_per_class = f.as_size(); };
    s["dataset.separation"] = [](auto& c, const Field& f) {
        c.dataset.synth.separation = f.as_double();
        if (c.dataset.synth.separation < 0.0) f.fail("must be non-negative");
    };
    s["dataset.image"] = [](auto& c, const Field& f) {
        const auto dims = f.as_sizes();
        if (dims.size() != 3 || std::count(dims.begin(), dims.end(), std::size_t{0}) > 0)
            f.fail("expected three positive sizes: channels, height, width");
        c.dataset.synth.image = Shape(dims.begin(), dims.end());
    };
    s["dataset.seed"] = [](auto& c, const Field& f) {
        c.dataset.synth.seed = f.as_u64(f.value);
        c.dataset.seed_pinned = true;
    };
    s["dataset.train_limit"] = [](auto& c, const Field& f) { c.dataset.train_limit = f.as_size(); };
    s["dataset.test_limit"] = [](auto& c, const Field& f) { c.dataset.test_limit = f.as_size(); };
    s["dataset.augment"] = [](auto& c, const Field& f) { c.dataset.augment = f.as_bool(); };
    s["dataset.preprocess"] = [](auto& c, const Field& f) { c.dataset.preprocess = f.as_bool(); };

    s["network.kind"] = [](auto& c, const Field& f) { c.network.kind = f.named(nn::parse_net_kind); };
    s["network.depth"] = [](auto& c, const Field& f) { c.network.depth = f.as_positive(); };
    s["network.width"] = [](auto& c, const Field& f) { c.network.width = f.as_positive(); };
    s["network.stream_relu"] = [](auto& c, const Field& f) { c.network.stream_relu = f.as_bool(); };
    s["network.normalization"] = [](auto& c, const Field& f) {
        c.network.normalization = f.named(nn::parse_norm_placement);
    };
    s["network.grouping"] = [](auto& c, const Field& f) { c.network.grouping.kind = f.named(nn::parse_grouping_kind); };
    s["network.groups"] = [](auto& c, const Field& f) { c.network.grouping.groups = f.as_positive(); };
    s["network.init"] = [](auto& c, const Field& f) { c.network.init.kind = f.named(parse_init_kind); };
    s["network.init_scale"] = [](auto& c, const Field& f) { c.network.init.scale = f.as_positive_double(); };
    s["network.bn.eps"] = [](auto& c, const Field& f) { c.network.bn.eps = f.as_positive_double(); };
    s["network.bn.momentum"] = [](auto& c, const Field& f) {
        c.network.bn.momentum = f.as_double();
        if (c.network.bn.momentum < 0.0 || c.network.bn.momentum > 1.0) f.fail("must lie in [0, 1]");
    };
    s["network.bn.use_mean"] = [](auto& c, const Field& f) { c.network.bn.toggles.use_mean = f.as_bool(); };
    s["network.bn.use_var"] = [](auto& c, const Field& f) { c.network.bn.toggles.use_var = f.as_bool(); };
    s["network.bn.use_gamma"] = [](auto& c, const Field& f) { c.network.bn.toggles.use_gamma = f.as_bool(); };
    s["network.bn.use_beta"] = [](auto& c, const Field& f) { c.network.bn.toggles.use_beta = f.as_bool(); };
    s["network.bn.stat_update_period"] = [](auto& c, const Field& f) {
        c.network.bn.stat_update_period = f.as_positive();
    };
    s["network.bn.track_disabled"] = [](auto& c, const Field& f) { c.network.bn.track_disabled = f.as_bool(); };

    s["train.batch_size"] = [](auto& c, const Field& f) {
        c.batch_size = f.as_size();
        if (c.batch_size < 2) f.fail("batch_size must be at least 2 for batch statistics");
    };
    s["train.lr"] = [](auto& c, const Field& f) { c.base_lr = f.as_positive_double(); };
    s["train.lr_sweep"] = [](auto& c, const Field& f) {
        c.lr_sweep = f.as_doubles();
        for (double v : c.lr_sweep)
            if (!(v > 0.0)) f.fail("sweep values must be positive");
        auto sorted = c.lr_sweep;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) f.fail("duplicate sweep value");
    };
    s["train.momentum"] = [](auto& c, const Field& f) {
        c.momentum = f.as_double();
        if (c.momentum < 0.0 || c.momentum >= 1.0) f.fail("must lie in [0, 1)");
    };
    s["train.weight_decay"] = [](auto& c, const Field& f) {
        c.weight_decay = f.as_double();
        if (c.weight_decay < 0.0) f.fail("must be non-negative");
    };
    s["train.epochs"] = [](auto& c, const Field& f) { c.epochs = f.as_size(); };
    s["train.steps"] = [](auto& c, const Field& f) { c.steps = f.as_size(); };
    s["train.eval_every"] = [](auto& c, const Field& f) { c.eval_every = f.as_size(); };
    s["train.tie_break"] = [](auto& c, const Field& f) {
        if (f.value == "larger_lr")
            c.tie_break = TieBreak::larger_lr;
        else if (f.value == "smaller_lr")
            c.tie_break = TieBreak::smaller_lr;
        else
            f.fail("expected larger_lr or smaller_lr");
    };

    s["divergence.capture"] = [](auto& c, const Field& f) { c.capture_divergence = f.as_bool(); };
    s["divergence.stop"] = [](auto& c, const Field& f) { c.stop_on_divergence = f.as_bool(); };
    s["divergence.threshold"] = [](auto& c, const Field& f) { c.divergence_threshold = f.as_positive_double(); };
    s["divergence.fractions"] = [](auto& c, const Field& f) {
        c.divergence_fractions = f.as_doubles();
        const auto& v = c.divergence_fractions;
        if (v.front() != 0.0 || v.back() != 1.0 || !std::is_sorted(v.begin(), v.end()))
            f.fail("fractions must ascend from 0 to 1");
    };

    for (auto name : instrument_names()) {
        s["diagnostics." + std::string(name)] = [name](auto& c, const Field& f) {
            const std::size_t every = f.as_size();
            if (every > 0) c.diagnostics.push_back({std::string(name), every});
        };
    }

    s["probe.alphas"] = [](auto& c, const Field& f) {
        c.probe_alphas = f.as_doubles();
        const auto& v = c.probe_alphas;
        if (v.front() < 0.0 || std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) != v.end())
            f.fail("alphas must be non-negative and strictly ascending");
    };

    s["rmt.m"] = [](auto& c, const Field& f) {
        c.rmt_m.clear();
        for (auto v : f.as_sizes()) {
            if (v == 0 || v > 64) f.fail("factor counts must lie in [1, 64]");
            c.rmt_m.push_back(static_cast<unsigned>(v));
        }
    };
    s["rmt.n"] = [](auto& c, const Field& f) {
        c.rmt_n = f.as_size();
        if (c.rmt_n < 2) f.fail("matrix size must be at least 2");
    };
    s["rmt.trials"] = [](auto& c, const Field& f) { c.rmt_trials = f.as_positive(); };
    s["rmt.sigmas"] = [](auto& c, const Field& f) {
        c.rmt_sigmas = f.as_doubles();
        for (double v : c.rmt_sigmas)
            if (!(v > 0.0)) f.fail("sigmas must be positive");
    };
    s["rmt.rescale"] = [](auto& c, const Field& f) { c.rmt_rescale = f.as_bool(); };
    s["rmt.points"] = [](auto& c, const Field& f) { c.rmt_points = f.as_positive(); };

    s["noise.model"] = [](auto& c, const Field& f) {
        if (f.value != "least_squares" && f.value != "network") f.fail("expected least_squares or network");
        c.noise_model = f.value;
    };
    s["noise.examples"] = [](auto& c, const Field& f) { c.noise_examples = f.as_positive(); };
    s["noise.dim"] = [](auto& c, const Field& f) { c.noise_dim = f.as_positive(); };
    s["noise.b"] = [](auto& c, const Field& f) {
        c.noise_batches = f.as_sizes();
        for (auto b : c.noise_batches)
            if (b == 0) f.fail("batch sizes must be positive");
    };
    s["noise.alpha"] = [](auto& c, const Field& f) { c.noise_alphas = f.as_doubles(); };
    s["noise.trials"] = [](auto& c, const Field& f) { c.noise_trials = f.as_positive(); };
    s["noise.modes"] = [](auto& c, const Field& f) {
        c.noise_modes = split_list(f.value);
        for (const auto& m : c.noise_modes)
            if (m != "with_replacement" && m != "without_replacement")
                f.fail("unknown sampling mode '" + m + "'");
    };

    s["output.dir"] = [](auto& c, const Field& f) {
        if (f.value.empty()) f.fail("output directory must not be empty");
        c.output_dir = f.value;
    };
    return s;
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : make_setters()) keys.push_back(k);
    return keys;
}

ExperimentConfig parse_config(std::string_view text, bool require_experiment) {
    const auto setters = make_setters();
    ExperimentConfig cfg;
    std::map<std::string, std::size_t> seen;

    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string content = trim(line);
        if (content.empty()) continue;
        const auto eq = content.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, content, "expected 'key = value'");
        Field f{line_no, trim(std::string_view(content).substr(0, eq)), trim(std::string_view(content).substr(eq + 1))};
        if (f.key.empty()) throw ParseError(line_no, f.key, "empty key");
        const auto it = setters.find(f.key);
        if (it == setters.end()) throw ParseError(line_no, f.key, "unknown key");
        if (const auto prev = seen.find(f.key); prev != seen.end())
            throw ParseError(line_no, f.key, "duplicate of line " + std::to_string(prev->second));
        if (f.value.empty()) throw ParseError(line_no, f.key, "missing value");
        seen.emplace(f.key, line_no);
        it->second(cfg, f);
        cfg.entries.emplace_back(f.key, f.value);
    }

    if (require_experiment) {
        for (const char* key : {"network.depth", "dataset"})
            if (!seen.count(key)) throw ParseError(0, key, "required key missing");
    }
    cfg.set_seed(cfg.seed);
    if (cfg.dataset.kind == DatasetKind::cifar10) {
        if (require_experiment && cfg.dataset.path.empty())
            throw ParseError(0, "dataset.path", "required for cifar10");
        cfg.dataset.synth.classes = 10;
        cfg.dataset.synth.image = {3, 32, 32};
    }
    cfg.network.class_count = cfg.dataset.synth.classes;
    cfg.network.input_shape = cfg.dataset.synth.image;
    if (require_experiment) cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, bool require_experiment) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const RunError& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text, require_experiment);
}

}  // namespace bnlab::harness
