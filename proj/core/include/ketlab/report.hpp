#pragma once

#include <string>
#include <vector>

#include "ketlab/completion.hpp"
#include "ketlab/diagnostics.hpp"
#include "ketlab/train.hpp"

namespace ketlab {

// All CSV output: comma separation, header row, '.' decimal, LF endings.

void write_metrics_csv(const std::string &path, const std::vector<MetricsRow> &rows);
void write_summary_json(const std::string &path, const RunSummary &summary);
std::string summary_to_json(const RunSummary &summary);

struct CompareRow {
    std::string variant;
    std::string regime;
    double val_ppl = 0.0;
    double test_ppl = 0.0;
    std::uint64_t seed = 0;
    int steps = 0;
    std::string dataset;
};

// Rows sorted by test PPL ascending before writing.
void write_compare_csv(const std::string &path, std::vector<CompareRow> rows);

void append_block_runs_csv(const std::string &path, const std::vector<BlockRunRow> &rows);

void write_probe_json(const std::string &path, const ProbeReport &report);
void write_leakage_json(const std::string &path, const LeakageReport &report);
void write_detach_json(const std::string &path, const DetachAuditReport &report);
void write_scaling_csv(const std::string &path, const std::vector<ScalingResult> &results);

std::string run_file_stem(const RunSummary &summary);  // <variant>_<dataset>_<seed>

}  // namespace ketlab
