// ketlab command-line front end: single trainings, regime comparisons,
// block-completion runs, and diagnostics, all emitting CSV/JSON artifacts.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ketlab/checkpoint.hpp"
#include "ketlab/completion.hpp"
#include "ketlab/corpus.hpp"
#include "ketlab/diagnostics.hpp"
#include "ketlab/model.hpp"
#include "ketlab/report.hpp"
#include "ketlab/train.hpp"

namespace {

using namespace ketlab;

struct RunOptions {
    std::string preset = "desk";
    std::string data = "synthetic";
    std::string out;
    std::string config_file;
    std::string variant = "transformer_causal";
    std::uint64_t seed = 7;
    int steps = 500;
    int width = 64;
    int layers = 2;
    int heads = 4;
    int context = 64;
    int batch = 16;
    int max_vocab = 4096;
    int block_size = 4;
    double lr = 3e-4;
    double weight_decay = 1e-5;
    double clip = 1.0;
    int eval_every = 1000;
    int report_every = 100;
    int eval_cap = 0;
};

void apply_preset(RunOptions &o, const std::string &preset) {
    if (preset == "desk") {
        o.width = 64;
        o.layers = 2;
        o.context = 64;
        o.batch = 16;
        o.steps = 500;
        o.weight_decay = 1e-5;
    } else if (preset == "paper-lm") {
        o.width = 256;
        o.layers = 2;
        o.context = 128;
        o.batch = 32;
        o.steps = 5000;
        o.weight_decay = 1e-5;
    } else if (preset == "paper-block") {
        o.width = 64;
        o.layers = 8;
        o.context = 128;
        o.batch = 32;
        o.steps = 2000;
        o.weight_decay = 1e-2;
        o.eval_every = 250;
        o.eval_cap = 100;
    } else {
        throw std::invalid_argument("unknown preset '" + preset + "'; valid: desk, paper-lm, paper-block");
    }
}

// flat key=value lines; '#' starts a comment
void apply_config_file(RunOptions &o, const std::string &path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read config file " + path);
    std::string line;
    std::map<std::string, std::string> kv;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto geti = [&](const char *k, int &dst) { if (kv.count(k)) dst = std::stoi(kv[k]); };
    auto getd = [&](const char *k, double &dst) { if (kv.count(k)) dst = std::stod(kv[k]); };
    auto gets = [&](const char *k, std::string &dst) { if (kv.count(k)) dst = kv[k]; };
    if (kv.count("seed")) o.seed = std::stoull(kv["seed"]);
    gets("variant", o.variant);
    gets("data", o.data);
    gets("out", o.out);
    geti("steps", o.steps);
    geti("width", o.width);
    geti("layers", o.layers);
    geti("heads", o.heads);
    geti("context", o.context);
    geti("batch", o.batch);
    geti("max_vocab", o.max_vocab);
    geti("block_size", o.block_size);
    geti("eval_every", o.eval_every);
    geti("report_every", o.report_every);
    geti("eval_cap", o.eval_cap);
    getd("lr", o.lr);
    getd("weight_decay", o.weight_decay);
    getd("clip", o.clip);
}

std::string output_root(const RunOptions &o) {
    if (!o.out.empty()) return o.out;
    if (const char *env = std::getenv("KETLAB_OUT")) return env;
    return "results";
}

std::string dataset_name(const std::string &data) {
    if (data == "synthetic") return "synthetic";
    return std::filesystem::path(data).stem().string();
}

Corpus load_data(const RunOptions &o) {
    if (o.data == "synthetic") return corpus_from_text(synthetic_text(), o.max_vocab);
    return corpus_from_file(o.data, o.max_vocab);
}

ModelConfig model_config(const RunOptions &o, VariantId variant, int vocab) {
    ModelConfig mc;
    mc.variant = variant;
    mc.layers = o.layers;
    mc.width = o.width;
    mc.heads = o.heads;
    mc.context = o.context;
    mc.vocab = vocab;
    mc.block_size = o.block_size;
    mc.seed = o.seed;
    return mc;
}

TrainConfig train_config(const RunOptions &o) {
    TrainConfig tc;
    tc.lr = o.lr;
    tc.weight_decay = o.weight_decay;
    tc.clip = o.clip;
    tc.steps = o.steps;
    tc.batch = o.batch;
    tc.eval_every = o.eval_every;
    tc.report_every = o.report_every;
    tc.eval_cap = o.eval_cap;
    tc.seed = o.seed;
    return tc;
}

RunSummary run_one_lm(const RunOptions &o, const Corpus &corpus, VariantId variant, const std::string &root) {
    Model model(model_config(o, variant, corpus.vocab.size()));
    RunSummary summary = train_lm(model, corpus, train_config(o), dataset_name(o.data));
    const std::string stem = run_file_stem(summary);
    write_metrics_csv(root + "/logs/" + stem + ".csv", summary.metrics);
    write_summary_json(root + "/summaries/" + stem + ".json", summary);
    save_checkpoint(model, root + "/summaries/" + stem + ".ckpt");
    std::cout << stem << ": val_ppl=" << summary.val_ppl << " test_ppl=" << summary.test_ppl
              << " wall=" << summary.wall_seconds << "s\n";
    return summary;
}

int cmd_train(const RunOptions &o) {
    const Corpus corpus = load_data(o);
    const VariantId variant = parse_variant(o.variant);
    if (!is_lm_variant(variant))
        throw std::invalid_argument("train runs LM variants; use `ketlab block` for " + o.variant);
    run_one_lm(o, corpus, variant, output_root(o));
    return 0;
}

int cmd_compare(const RunOptions &o, std::vector<std::string> variants) {
    if (variants.size() < 2) throw std::invalid_argument("compare needs at least 2 variants");
    const Corpus corpus = load_data(o);
    const std::string root = output_root(o);
    std::vector<CompareRow> rows;
    for (const auto &name : variants) {
        const VariantId v = parse_variant(name);
        const RunSummary s = run_one_lm(o, corpus, v, root);
        rows.push_back({s.variant, s.regime, s.val_ppl, s.test_ppl, s.seed, s.steps, s.dataset});
    }
    const std::string path =
        root + "/summaries/compare_" + dataset_name(o.data) + "_" + std::to_string(o.seed) + ".csv";
    write_compare_csv(path, rows);
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_block(const RunOptions &o, const std::string &objective, const std::string &backbone) {
    if (objective != "direct" && objective != "denoise")
        throw std::invalid_argument("objective must be direct or denoise, got '" + objective + "'");
    std::vector<std::string> backbones;
    if (backbone.empty()) {
        backbones = {"tf", "ket"};  // matched pair
    } else if (backbone == "tf" || backbone == "ket") {
        backbones = {backbone};
    } else {
        throw std::invalid_argument("backbone must be tf or ket, got '" + backbone + "'");
    }
    const Corpus corpus = load_data(o);
    const std::string root = output_root(o);
    for (const auto &bb : backbones) {
        const std::string name = bb + (objective == "direct" ? "_block" : "_denoise");
        const VariantId v = parse_variant(name);
        Model model(model_config(o, v, corpus.vocab.size()));
        BlockRunResult result = train_block(model, corpus, train_config(o), dataset_name(o.data));
        append_block_runs_csv(root + "/logs/all_runs.csv", result.rows);
        const std::string stem = run_file_stem(result.summary);
        write_metrics_csv(root + "/logs/" + stem + ".csv", result.summary.metrics);
        write_summary_json(root + "/summaries/" + stem + ".json", result.summary);
        const auto &last = result.rows.back();
        std::cout << stem << ": first_ppl=" << last.first_ppl << " block_ppl=" << last.block_ppl << "\n";
    }
    return 0;
}

int cmd_diagnose(const RunOptions &o, const std::string &probe) {
    const std::string root = output_root(o);
    if (probe == "scaling") {
        const std::vector<int> grid{128, 256, 512, 1024};
        std::vector<ScalingResult> results{scaling_measurement(ScalingKind::ket_quadratic, grid),
                                           scaling_measurement(ScalingKind::ket_incidence, grid)};
        const std::string path = root + "/logs/scaling.csv";
        write_scaling_csv(path, results);
        std::cout << "quadratic exponent " << results[0].exponent << ", incidence exponent " << results[1].exponent
                  << "; wrote " << path << "\n";
        return 0;
    }
    const Corpus corpus = load_data(o);
    const VariantId variant = parse_variant(o.variant);
    if (probe == "causality") {
        ModelConfig mc = model_config(o, variant, corpus.vocab.size());
        Model model(mc);
        BatchStream stream(corpus, Split::valid, o.context, 1, o.seed);
        const ProbeReport report = probe_variant(model, stream.next());
        const std::string path = root + "/summaries/probe_" + o.variant + ".json";
        write_probe_json(path, report);
        std::cout << o.variant << ": " << (report.causal ? "causal" : "future-sensitive")
                  << " (max delta " << report.max_delta << "); wrote " << path << "\n";
        return 0;
    }
    if (probe == "detach") {
        ModelConfig mc = model_config(o, variant, corpus.vocab.size());
        Model model(mc);
        BatchStream stream(corpus, Split::valid, o.context, 2, o.seed);
        const DetachAuditReport report = detach_gradient_audit(model, stream.next());
        const std::string path = root + "/summaries/detach_" + o.variant + ".json";
        write_detach_json(path, report);
        std::cout << o.variant << ": detach audit " << (report.pass ? "pass" : "fail") << "; wrote " << path << "\n";
        return report.pass ? 0 : 1;
    }
    if (probe == "leakage") {
        LeakageConfig cfg;
        cfg.steps = std::min(o.steps, 200);
        cfg.seed = o.seed;
        const LeakageReport report = leakage_shuffle_test(variant, corpus, cfg);
        const std::string path = root + "/summaries/leakage_" + o.variant + ".json";
        write_leakage_json(path, report);
        std::cout << o.variant << ": " << (report.leaking ? "leaking" : "not-leaking") << " (shuffled "
                  << report.shuffled_ppl << " vs threshold " << report.threshold << "); wrote " << path << "\n";
        return 0;
    }
    throw std::invalid_argument("unknown probe '" + probe + "'; valid: causality, leakage, detach, scaling");
}

int cmd_report(const RunOptions &o) {
    const std::string root = output_root(o);
    const std::string dir = root + "/summaries";
    if (!std::filesystem::exists(dir)) {
        std::cout << "no summaries under " << dir << "\n";
        return 0;
    }
    std::cout << "run summaries in " << dir << ":\n";
    for (const auto &entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream is(entry.path());
        std::stringstream ss;
        ss << is.rdbuf();
        std::cout << "--- " << entry.path().filename().string() << "\n" << ss.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"ketlab: Kan-extension transformer laboratory"};
    app.require_subcommand(1);

    RunOptions opt;
    std::vector<std::string> variants;
    std::string objective = "denoise";
    std::string backbone;
    std::string probe = "causality";

    auto add_common = [&](CLI::App *cmd) {
        cmd->add_option("--preset", opt.preset, "desk | paper-lm | paper-block");
        cmd->add_option("--config", opt.config_file, "flat key=value config file");
        cmd->add_option("--data", opt.data, "UTF-8 text file path, or 'synthetic'");
        cmd->add_option("--out", opt.out, "output root (default results/, or KETLAB_OUT)");
        cmd->add_option("--seed", opt.seed);
        cmd->add_option("--steps", opt.steps);
        cmd->add_option("--width", opt.width);
        cmd->add_option("--layers", opt.layers);
        cmd->add_option("--heads", opt.heads);
        cmd->add_option("--context", opt.context);
        cmd->add_option("--batch", opt.batch);
        cmd->add_option("--lr", opt.lr);
        cmd->add_option("--weight-decay", opt.weight_decay);
        cmd->add_option("--max-vocab", opt.max_vocab);
        cmd->add_option("--eval-every", opt.eval_every);
        cmd->add_option("--report-every", opt.report_every);
        cmd->add_option("--eval-cap", opt.eval_cap);
    };

    CLI::App *train = app.add_subcommand("train", "train one LM variant");
    train->add_option("--variant", opt.variant, "LM variant name");
    add_common(train);

    CLI::App *compare = app.add_subcommand("compare", "train several variants and tabulate");
    compare->add_option("--variants", variants, "comma-separated variant names")->delimiter(',');
    add_common(compare);

    CLI::App *block = app.add_subcommand("block", "block prediction / denoising runs");
    block->add_option("--objective", objective, "direct | denoise");
    block->add_option("--backbone", backbone, "tf | ket (default: both, the matched pair)");
    block->add_option("--block-size", opt.block_size);
    add_common(block);

    CLI::App *diagnose = app.add_subcommand("diagnose", "causality / leakage / detach / scaling probes");
    diagnose->add_option("--probe", probe, "causality | leakage | detach | scaling");
    diagnose->add_option("--variant", opt.variant, "variant under test");
    add_common(diagnose);

    CLI::App *report = app.add_subcommand("report", "print collected run summaries");
    report->add_option("--out", opt.out, "output root to read");

    CLI11_PARSE(app, argc, argv);

    try {
        // precedence: preset < config file < explicit flags; flags were
        // parsed into opt already, so re-apply the ones the user passed
        RunOptions resolved;
        apply_preset(resolved, opt.preset);
        resolved.preset = opt.preset;
        if (!opt.config_file.empty()) apply_config_file(resolved, opt.config_file);
        auto take_if = [&](CLI::App *cmd, const std::string &flag, auto &dst, const auto &src) {
            if (cmd->count(flag) > 0) dst = src;
        };
        CLI::App *active = train->parsed() ? train
                           : compare->parsed() ? compare
                           : block->parsed() ? block
                           : diagnose->parsed() ? diagnose
                                               : report;
        if (active != report) {
            take_if(active, "--data", resolved.data, opt.data);
            take_if(active, "--out", resolved.out, opt.out);
            take_if(active, "--seed", resolved.seed, opt.seed);
            take_if(active, "--steps", resolved.steps, opt.steps);
            take_if(active, "--width", resolved.width, opt.width);
            take_if(active, "--layers", resolved.layers, opt.layers);
            take_if(active, "--heads", resolved.heads, opt.heads);
            take_if(active, "--context", resolved.context, opt.context);
            take_if(active, "--batch", resolved.batch, opt.batch);
            take_if(active, "--lr", resolved.lr, opt.lr);
            take_if(active, "--weight-decay", resolved.weight_decay, opt.weight_decay);
            take_if(active, "--max-vocab", resolved.max_vocab, opt.max_vocab);
            take_if(active, "--eval-every", resolved.eval_every, opt.eval_every);
            take_if(active, "--report-every", resolved.report_every, opt.report_every);
            take_if(active, "--eval-cap", resolved.eval_cap, opt.eval_cap);
            if (active == block) take_if(active, "--block-size", resolved.block_size, opt.block_size);
            if (active->count("--variant") > 0) resolved.variant = opt.variant;
        } else {
            resolved.out = opt.out;
        }

        if (train->parsed()) return cmd_train(resolved);
        if (compare->parsed()) return cmd_compare(resolved, variants);
        if (block->parsed()) return cmd_block(resolved, objective, backbone);
        if (diagnose->parsed()) return cmd_diagnose(resolved, probe);
        return cmd_report(resolved);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
