#include "bnlab/harness/experiment.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "bnlab/error.hpp"
#include "bnlab/harness/reports.hpp"
#include "bnlab/nn/sgd.hpp"

namespace bnlab::harness {

SplitSet prepare_data(const ExperimentConfig& config) {
    const auto& dc = config.dataset;
    SplitSet data;
    if (dc.kind == DatasetKind::synthetic) {
        data = synth_dataset(dc.synth);
    } else {
        data.train = load_cifar10(dc.path, true);
        data.test = load_cifar10(dc.path, false);
    }
    if (dc.train_limit) data.train = data.train.head(dc.train_limit);
    if (dc.test_limit) data.test = data.test.head(dc.test_limit);
    if (data.train.size() == 0) throw ConfigError("training set is empty");
    if (dc.preprocess) {
        LabeledImageSet* others[] = {&data.test};
        preprocess(data.train, others);
    }
    return data;
}

std::uint64_t leg_seed(std::uint64_t seed, double lr) {
    return splitmix64(seed ^ splitmix64(std::bit_cast<std::uint64_t>(lr)));
}

std::string leg_name(double lr) {
    char buf[40];
    for (int digits = 1; digits <= 17; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, lr);
        if (std::strtod(buf, nullptr) == lr) break;
    }
    return std::string("lr_") + buf;
}

double evaluate_accuracy(nn::Network& net, const LabeledImageSet& set, std::size_t batch_size) {
    if (set.size() == 0) throw SizeError("accuracy of an empty set");
    std::size_t correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < set.size(); start += batch_size) {
        const std::size_t end = std::min(set.size(), start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const LabeledImageSet batch = set.gather(idx);
        const Tensor logits = net.forward(batch.images, nn::Mode::eval);
        correct += static_cast<std::size_t>(std::llround(nn::accuracy(logits, batch.labels) * batch.size()));
    }
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

namespace {

class BatchStream {
public:
    BatchStream(const LabeledImageSet& set, std::size_t batch, bool augment, std::uint64_t seed)
        : set_(set), batch_(batch), augment_(augment), order_(seed, 1), aug_(seed, 2), perm_(set.size()),
          pos_(set.size()) {
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    }

    LabeledImageSet next() {
        if (pos_ + batch_ > perm_.size()) {
            for (std::size_t i = perm_.size(); i > 1; --i) std::swap(perm_[i - 1], perm_[order_.uniform_index(i)]);
            pos_ = 0;
        }
        LabeledImageSet b = set_.gather(std::span<const std::size_t>(perm_).subspan(pos_, batch_));
        pos_ += batch_;
        if (augment_) augment_batch(b.images, aug_);
        return b;
    }

private:
    const LabeledImageSet& set_;
    std::size_t batch_;
    bool augment_;
    SeededRng order_, aug_;
    std::vector<std::size_t> perm_;
    std::size_t pos_;
};

CsvTable& report(LegResult& leg, const std::string& file, CsvTable (*make)()) {
    auto it = leg.reports.find(file);
    if (it == leg.reports.end()) it = leg.reports.emplace(file, make()).first;
    return it->second;
}

void run_instrument(const std::string& name, std::size_t step, nn::Network& net, const LabeledImageSet& batch,
                    LegResult& leg) {
    const Tensor& x = batch.images;
    const std::span<const int> labels = batch.labels;
    if (name == "moments") {
        add_moments(report(leg, "moments.csv", moments_table), step, diag::depth_moment_profile(net, x));
    } else if (name == "coherence") {
        add_coherence(report(leg, "coherence.csv", coherence_table), step, diag::sign_coherence(net, x, labels));
    } else if (name == "histogram") {
        net.compute_gradients(x, labels, nn::Mode::probe);
        auto& t = report(leg, "grad_histogram.csv", histogram_table);
        for (const auto& tap : net.taps())
            add_histogram(t, step, tap.index, diag::gradient_histogram_stats(tap.weight->weight_grad().data()));
    } else if (name == "class_heatmap") {
        add_heatmap(report(leg, "class_heatmap.csv", heatmap_table),
                    report(leg, "class_heatmap_summary.csv", heatmap_summary_table), step,
                    diag::class_grad_heatmap(net, x, labels), labels);
    } else if (name == "channel_grads") {
        add_channel_grads(report(leg, "channel_grads.csv", channel_grads_table), step,
                          diag::channel_gradients(net, x, labels));
    } else if (name == "channel_matrix") {
        net.compute_gradients(x, labels, nn::Mode::probe);
        auto& t = report(leg, "channel_matrix.csv", channel_matrix_table);
        for (const auto& tap : net.taps())
            if (tap.weight->is_conv())
                add_channel_matrix(t, step, tap.index, diag::channel_grad_matrix(tap.weight->weight_grad()));
    } else if (name == "mean_vs_grad") {
        add_mean_vs_grad(report(leg, "mean_vs_grad.csv", mean_vs_grad_table), step,
                         diag::mean_vs_grad_pairs(net, x, labels));
    } else if (name == "probe_loss") {
        const auto alphas = diag::default_probe_alphas();
        add_probe(report(leg, "probe_loss.csv", probe_table), step, diag::loss_step_probe(net, x, labels, alphas));
    } else if (name == "classwise_mask") {
        add_classwise(report(leg, "classwise_mask.csv", classwise_table), step,
                      diag::classwise_gradient_masks(net, x, labels));
    } else {
        throw ConfigError("unknown instrument '" + name + "'");
    }
}

}  // namespace

LegResult run_leg(const ExperimentConfig& config, const SplitSet& data, double lr) {
    LegResult leg;
    leg.lr = lr;
    leg.seed = leg_seed(config.seed, lr);
    leg.name = leg_name(lr);

    SeededRng init_rng(leg.seed, 0);
    nn::Network net = nn::build_network(config.network, init_rng);

    const std::size_t n = data.train.size();
    const std::size_t b = std::min(config.batch_size, n);
    if (b < 2) throw ConfigError("training set too small for a batch of two");
    const std::size_t per_epoch = n / b;
    const std::size_t total = config.steps ? config.steps : config.epochs * per_epoch;
    const std::size_t eval_every = config.eval_every ? config.eval_every : per_epoch;
    leg.steps_planned = total;

    BatchStream stream(data.train, b, config.dataset.augment, leg.seed);
    std::optional<LabeledImageSet> pending;
    if (total > 0 || !config.diagnostics.empty()) pending = stream.next();
    for (const auto& ins : config.diagnostics) run_instrument(ins.name, 0, net, *pending, leg);

    nn::SgdState sgd(nn::SgdOptions{lr, config.momentum, config.weight_decay, {}});
    const auto params = net.params();
    diag::DivergenceCapture capture({config.divergence_threshold, config.divergence_fractions});

    for (std::size_t step = 1; step <= total; ++step) {
        const LabeledImageSet batch = pending ? std::move(*pending) : stream.next();
        pending.reset();

        std::vector<Tensor> before;
        if (config.capture_divergence) before = net.parameter_values();
        MetricRow row;
        row.step = step;
        row.epoch = static_cast<double>(step) / static_cast<double>(per_epoch);
        row.loss = net.compute_gradients(batch.images, batch.labels, nn::Mode::train);
        row.train_acc = nn::accuracy(net.last_logits(), batch.labels);
        const double fraction = static_cast<double>(step - 1) / static_cast<double>(total);
        row.lr = nn::sgd_step(params, sgd, fraction).lr;

        bool stop = false;
        if (config.capture_divergence && !capture.event()) {
            const double post = net.loss(batch.images, batch.labels, nn::Mode::probe);
            if (capture.observe(net, before, batch.images, batch.labels, step, row.loss, post)) {
                leg.divergence = capture.event();
                stop = config.stop_on_divergence;
            }
        }
        if (!leg.diverged() && data.test.size() > 0 && (step % eval_every == 0 || step == total))
            row.test_acc = evaluate_accuracy(net, data.test, config.batch_size);
        leg.metrics.push_back(row);
        leg.steps_run = step;

        for (const auto& ins : config.diagnostics)
            if (step % ins.every == 0) run_instrument(ins.name, step, net, batch, leg);
        if (stop) break;
    }
    if (!leg.diverged() && !leg.metrics.empty()) leg.final_test_acc = leg.metrics.back().test_acc;
    return leg;
}

std::optional<std::size_t> select_best_leg(const std::vector<LegResult>& legs, TieBreak tie_break) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < legs.size(); ++i) {
        const auto& l = legs[i];
        if (l.diverged() || !l.final_test_acc || std::isnan(*l.final_test_acc)) continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& cur = legs[*best];
        if (*l.final_test_acc > *cur.final_test_acc) {
            best = i;
        } else if (*l.final_test_acc == *cur.final_test_acc) {
            const bool larger = l.lr > cur.lr;
            if (larger == (tie_break == TieBreak::larger_lr)) best = i;
        }
    }
    return best;
}

RunArtifact run_experiment(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    RunArtifact art;
    art.config = config;
    const SplitSet data = prepare_data(config);
    for (double lr : config.learning_rates()) art.legs.push_back(run_leg(config, data, lr));
    art.best_leg = select_best_leg(art.legs, config.tie_break);
    art.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return art;
}

CsvTable metrics_table(const std::vector<MetricRow>& rows) {
    CsvTable t{{"step", "epoch", "lr", "loss", "train_acc", "test_acc"}, {}};
    for (const auto& r : rows)
        t.add({format_number(r.step), format_number(r.epoch), format_number(r.lr), format_number(r.loss),
               format_number(r.train_acc), r.test_acc ? format_number(*r.test_acc) : std::string()});
    return t;
}

nlohmann::ordered_json config_json(const ExperimentConfig& c) {
    using nlohmann::ordered_json;
    const auto& n = c.network;
    ordered_json net{{"kind", nn::to_string(n.kind)},
                     {"depth", n.depth},
                     {"width", n.width},
                     {"stream_relu", n.stream_relu},
                     {"class_count", n.class_count},
                     {"input_shape", n.input_shape},
                     {"normalization", nn::to_string(n.normalization)},
                     {"grouping", nn::to_string(n.grouping.kind)},
                     {"groups", n.grouping.groups},
                     {"init", to_string(n.init.kind)},
                     {"init_scale", n.init.scale},
                     {"bn",
                      {{"eps", n.bn.eps},
                       {"momentum", n.bn.momentum},
                       {"use_mean", n.bn.toggles.use_mean},
                       {"use_var", n.bn.toggles.use_var},
                       {"use_gamma", n.bn.toggles.use_gamma},
                       {"use_beta", n.bn.toggles.use_beta},
                       {"stat_update_period", n.bn.stat_update_period},
                       {"track_disabled", n.bn.track_disabled}}}};
    const auto& d = c.dataset;
    ordered_json data{{"kind", d.kind == DatasetKind::synthetic ? "synthetic" : "cifar10"},
                      {"path", d.path.string()},
                      {"classes", d.synth.classes},
                      {"per_class", d.synth.per_class},
                      {"test_per_class", d.synth.test_per_class},
                      {"separation", d.synth.separation},
                      {"image", d.synth.image},
                      {"seed", d.synth.seed},
                      {"train_limit", d.train_limit},
                      {"test_limit", d.test_limit},
                      {"augment", d.augment},
                      {"preprocess", d.preprocess}};
    ordered_json diags = ordered_json::object();
    for (const auto& i : c.diagnostics) diags[i.name] = i.every;
    ordered_json echo = ordered_json::object();
    for (const auto& [k, v] : c.entries) echo[k] = v;
    return {{"seed", c.seed},
            {"network", net},
            {"dataset", data},
            {"train",
             {{"batch_size", c.batch_size},
              {"lr", c.base_lr},
              {"lr_sweep", c.lr_sweep},
              {"momentum", c.momentum},
              {"weight_decay", c.weight_decay},
              {"epochs", c.epochs},
              {"steps", c.steps},
              {"eval_every", c.eval_every},
              {"tie_break", c.tie_break == TieBreak::larger_lr ? "larger_lr" : "smaller_lr"}}},
            {"divergence",
             {{"capture", c.capture_divergence},
              {"stop", c.stop_on_divergence},
              {"threshold", c.divergence_threshold},
              {"fractions", c.divergence_fractions}}},
            {"diagnostics", diags},
            {"entries", echo}};
}

namespace {

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json emit_leg(const LegResult& leg, ArtifactWriter& out, const std::filesystem::path& sub,
                                bool best) {
    out.csv(sub / "metrics.csv", metrics_table(leg.metrics));
    for (const auto& [file, table] : leg.reports) out.csv(sub / file, table);
    nlohmann::ordered_json j{{"lr", leg.lr},
                             {"seed", leg.seed},
                             {"dir", sub.empty() ? "." : sub.string()},
                             {"steps_planned", leg.steps_planned},
                             {"steps_run", leg.steps_run},
                             {"diverged", leg.diverged()},
                             {"best", best}};
    if (leg.divergence) {
        const auto& e = *leg.divergence;
        CsvTable moments = divergence_moments_table(), summary = divergence_summary_table();
        add_divergence(moments, summary, e);
        out.csv(sub / "divergence_moments.csv", moments);
        out.csv(sub / "divergence_summary.csv", summary);
        nlohmann::ordered_json fr = nlohmann::ordered_json::array();
        for (const auto& s : e.snapshots) fr.push_back({{"fraction", s.fraction}, {"loss", s.loss}});
        nlohmann::ordered_json ev{
            {"step", e.step}, {"pre_loss", e.pre_loss}, {"post_loss", e.post_loss}, {"fractions", fr}};
        out.json(sub / "divergence.json", ev);
        j["divergence"] = ev;
    } else {
        j["divergence"] = nullptr;
    }
    if (!leg.metrics.empty()) {
        j["final_loss"] = leg.metrics.back().loss;
        j["final_train_acc"] = leg.metrics.back().train_acc;
    } else {
        j["final_loss"] = nullptr;
        j["final_train_acc"] = nullptr;
    }
    j["final_test_acc"] = optional_number(leg.final_test_acc);
    return j;
}

}  // namespace

std::vector<std::filesystem::path> emit(const RunArtifact& art, const std::filesystem::path& dir) {
    ArtifactWriter out(dir);
    const bool sweep = art.legs.size() > 1;
    nlohmann::ordered_json legs = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < art.legs.size(); ++i) {
        const auto sub = sweep ? std::filesystem::path(art.legs[i].name) : std::filesystem::path();
        legs.push_back(emit_leg(art.legs[i], out, sub, art.best_leg == i));
    }
    std::string echo;
    for (const auto& [k, v] : art.config.entries) echo += k + " = " + v + "\n";
    out.text("config.txt", echo);

    nlohmann::ordered_json summary{{"config", config_json(art.config)}, {"legs", legs}};
    if (art.best_leg) {
        summary["best_leg"] = *art.best_leg;
        summary["best_lr"] = art.legs[*art.best_leg].lr;
    } else {
        summary["best_leg"] = nullptr;
        summary["best_lr"] = nullptr;
    }
    summary["wall_seconds"] = art.wall_seconds;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& f : out.files()) files.push_back(f.generic_string());
    files.push_back("summary.json");
    summary["files"] = files;
    out.json("summary.json", summary);
    return out.files();
}

}  // namespace bnlab::harness
