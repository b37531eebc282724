#include "ketlab/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace ketlab {

namespace {

std::ofstream open_out(const std::string &path, std::ios::openmode mode = std::ios::binary) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream os(path, mode);
    if (!os) throw std::runtime_error("report: cannot write " + path);
    return os;
}

nlohmann::json config_json(const RunSummary &s) {
    const ModelConfig &m = s.model_cfg;
    const TrainConfig &t = s.train_cfg;
    return {
        {"variant", to_string(m.variant)},
        {"layers", m.layers},
        {"width", m.width},
        {"heads", m.heads},
        {"context", m.context},
        {"vocab", m.vocab},
        {"topo_k", m.topo_k},
        {"topo_dim", m.topo_dim},
        {"carrier_temp", m.carrier_temp},
        {"block_size", m.block_size},
        {"denoise_steps", m.denoise_steps},
        {"model_seed", m.seed},
        {"lr", t.lr},
        {"weight_decay", t.weight_decay},
        {"clip", t.clip},
        {"steps", t.steps},
        {"batch", t.batch},
        {"eval_every", t.eval_every},
        {"report_every", t.report_every},
        {"eval_cap", t.eval_cap},
        {"shuffled_targets", t.shuffled_targets},
        {"eval_windows", s.eval_windows},
    };
}

}  // namespace

void write_metrics_csv(const std::string &path, const std::vector<MetricsRow> &rows) {
    auto os = open_out(path);
    os << "step,split,loss,ppl,wall_sec\n";
    for (const auto &r : rows)
        os << r.step << "," << r.split << "," << r.loss << "," << r.ppl << "," << r.wall_sec << "\n";
}

std::string summary_to_json(const RunSummary &s) {
    nlohmann::json j{
        {"variant", s.variant},
        {"regime", s.regime},
        {"dataset", s.dataset},
        {"final_train_loss", s.final_train_loss},
        {"val_ppl", s.val_ppl},
        {"test_ppl", s.test_ppl},
        {"steps", s.steps},
        {"wall_seconds", s.wall_seconds},
        {"iters_per_sec", s.iters_per_sec},
        {"seed", s.seed},
        {"config", config_json(s)},
    };
    return j.dump(2);
}

void write_summary_json(const std::string &path, const RunSummary &summary) {
    auto os = open_out(path);
    os << summary_to_json(summary) << "\n";
}

void write_compare_csv(const std::string &path, std::vector<CompareRow> rows) {
    std::sort(rows.begin(), rows.end(), [](const CompareRow &a, const CompareRow &b) {
        return a.test_ppl < b.test_ppl;
    });
    auto os = open_out(path);
    os << "variant,regime,val_ppl,test_ppl,seed,steps,dataset\n";
    for (const auto &r : rows)
        os << r.variant << "," << r.regime << "," << r.val_ppl << "," << r.test_ppl << "," << r.seed << ","
           << r.steps << "," << r.dataset << "\n";
}

void append_block_runs_csv(const std::string &path, const std::vector<BlockRunRow> &rows) {
    const bool exists = std::filesystem::exists(path);
    auto os = open_out(path, std::ios::binary | std::ios::app);
    if (!exists) os << "dataset,model,L,seed,step,first_ppl,block_ppl\n";
    for (const auto &r : rows)
        os << r.dataset << "," << r.model << "," << r.layers << "," << r.seed << "," << r.step << "," << r.first_ppl
           << "," << r.block_ppl << "\n";
}

void write_probe_json(const std::string &path, const ProbeReport &report) {
    nlohmann::json deltas = nlohmann::json::array();
    for (const auto &d : report.deltas) deltas.push_back({{"t", d.t}, {"s", d.s}, {"max_abs_delta", d.max_abs_delta}});
    nlohmann::json j{
        {"variant", report.variant},
        {"context", report.context},
        {"max_delta", report.max_delta},
        {"verdict", report.causal ? "causal" : "future-sensitive"},
        {"deltas", deltas},
    };
    auto os = open_out(path);
    os << j.dump(2) << "\n";
}

void write_leakage_json(const std::string &path, const LeakageReport &report) {
    nlohmann::json j{
        {"variant", report.variant},
        {"true_ppl", report.true_ppl},
        {"shuffled_ppl", report.shuffled_ppl},
        {"baseline_true_ppl", report.baseline_true_ppl},
        {"threshold", report.threshold},
        {"verdict", report.leaking ? "leaking" : "not-leaking"},
    };
    auto os = open_out(path);
    os << j.dump(2) << "\n";
}

void write_detach_json(const std::string &path, const DetachAuditReport &report) {
    nlohmann::json j{
        {"variant", report.variant},
        {"aux_grad_w_out", report.aux_grad_w_out},
        {"aux_grad_w_out_no_detach", report.aux_grad_w_out_no_detach},
        {"lm_grad_w_out", report.lm_grad_w_out},
        {"lm_grad_emb", report.lm_grad_emb},
        {"verdict", report.pass ? "pass" : "fail"},
    };
    auto os = open_out(path);
    os << j.dump(2) << "\n";
}

void write_scaling_csv(const std::string &path, const std::vector<ScalingResult> &results) {
    auto os = open_out(path);
    os << "S,seconds,kind\n";
    for (const auto &r : results) {
        const char *kind = r.kind == ScalingKind::ket_quadratic ? "ket_quadratic" : "ket_incidence";
        for (const auto &s : r.samples) os << s.S << "," << s.seconds << "," << kind << "\n";
    }
}

std::string run_file_stem(const RunSummary &s) {
    return s.variant + "_" + s.dataset + "_" + std::to_string(s.seed);
}

}  // namespace ketlab
