#pragma once

#include <functional>
#include <string>
#include <vector>

namespace tecswin {

// Partition of the denoising trajectory into stages with per-stage substep
// counts; stage 0 is the noisiest.
struct StageSchedule {
    std::vector<double> boundaries;  // S+1 values, strictly decreasing, T..0
    std::vector<int> substeps;       // S positive counts

    int stages() const { return static_cast<int>(substeps.size()); }
    double timestep_max() const { return boundaries.front(); }
    int total_steps() const;

    // strictly decreasing timestep sequence, ends at 0
    std::vector<double> realized() const;

    void validate() const;

    std::string to_json() const;
    static StageSchedule from_json(const std::string& text);
};

StageSchedule build_staged_schedule(int T, int stages, const std::vector<int>& substeps);

struct SearchTrial {
    int stage;
    int candidate;
    double metric;
};

struct SearchReport {
    std::vector<SearchTrial> trials;
    StageSchedule final_schedule;
    std::vector<double> metric_trajectory;  // best metric after each stage
    double initial_metric = 0.0;
    double final_metric = 0.0;

    // line-delimited trial log plus a final summary line
    std::string to_jsonl() const;
};

using ScheduleMetric = std::function<double(const StageSchedule&)>;

// One ordered coordinate-descent sweep, stage 0..S-1; each stage keeps the
// candidate (incumbent always included) minimizing the metric.
SearchReport greedy_substep_search(const ScheduleMetric& metric, const StageSchedule& base,
                                   const std::vector<int>& candidates, int passes = 1);

// grid evaluation; returns (argmin, full table)
std::pair<double, std::vector<std::pair<double, double>>> scan_scalar(
    const std::function<double(double)>& metric, const std::vector<double>& grid);

}  // namespace tecswin
