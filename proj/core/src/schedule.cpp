#include "tecswin/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tecswin {

int StageSchedule::total_steps() const {
    int n = 0;
    for (int s : substeps) n += s;
    return n;
}

std::vector<double> StageSchedule::realized() const {
    validate();
    std::vector<double> ts;
    for (int i = 0; i < stages(); ++i) {
        double hi = boundaries[i], lo = boundaries[i + 1];
        int n = substeps[i];
        for (int j = 0; j < n; ++j) ts.push_back(hi - j * (hi - lo) / n);
    }
    ts.push_back(0.0);
    return ts;
}

void StageSchedule::validate() const {
    if (substeps.empty()) throw std::invalid_argument("schedule: empty substeps");
    if (boundaries.size() != substeps.size() + 1)
        throw std::invalid_argument("schedule: boundaries/substeps size mismatch");
    for (size_t i = 0; i + 1 < boundaries.size(); ++i)
        if (!(boundaries[i] > boundaries[i + 1]))
            throw std::invalid_argument("schedule: boundaries must strictly decrease");
    if (boundaries.back() != 0.0) throw std::invalid_argument("schedule: must end at 0");
    for (int s : substeps)
        if (s < 1) throw std::invalid_argument("schedule: substeps must be >= 1");
}

std::string StageSchedule::to_json() const {
    nlohmann::json j;
    j["boundaries"] = boundaries;
    j["substeps"] = substeps;
    return j.dump(2);
}

StageSchedule StageSchedule::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    StageSchedule s;
    s.boundaries = j.at("boundaries").get<std::vector<double>>();
    s.substeps = j.at("substeps").get<std::vector<int>>();
    s.validate();
    return s;
}

StageSchedule build_staged_schedule(int T, int stages, const std::vector<int>& substeps) {
    if (stages < 1) throw std::invalid_argument("build_staged_schedule: stages < 1");
    if (substeps.empty()) throw std::invalid_argument("build_staged_schedule: empty substeps");
    std::vector<int> subs = substeps;
    if (static_cast<int>(subs.size()) == 1) subs.assign(stages, substeps[0]);
    if (static_cast<int>(subs.size()) != stages)
        throw std::invalid_argument("build_staged_schedule: substeps size mismatch");
    StageSchedule s;
    s.substeps = subs;
    s.boundaries.resize(stages + 1);
    for (int i = 0; i <= stages; ++i)
        s.boundaries[i] = static_cast<double>(T) * (stages - i) / stages;
    s.validate();
    return s;
}

std::string SearchReport::to_jsonl() const {
    std::ostringstream os;
    for (const auto& t : trials) {
        nlohmann::json j;
        j["stage"] = t.stage;
        j["candidate"] = t.candidate;
        j["metric"] = t.metric;
        os << j.dump() << "\n";
    }
    nlohmann::json fin;
    fin["initial_metric"] = initial_metric;
    fin["final_metric"] = final_metric;
    fin["trajectory"] = metric_trajectory;
    fin["final_substeps"] = final_schedule.substeps;
    os << fin.dump() << "\n";
    return os.str();
}

SearchReport greedy_substep_search(const ScheduleMetric& metric, const StageSchedule& base,
                                   const std::vector<int>& candidates, int passes) {
    if (candidates.empty())
        throw std::invalid_argument("greedy_substep_search: empty candidate set");
    base.validate();

    SearchReport report;
    StageSchedule current = base;
    auto eval = [&](const StageSchedule& s, int stage) {
        try {
            return metric(s);
        } catch (const std::exception& e) {
            throw std::runtime_error("metric failed at stage " + std::to_string(stage) + ": " +
                                     e.what());
        }
    };
    double best = eval(current, -1);
    report.initial_metric = best;

    for (int pass = 0; pass < passes; ++pass) {
        for (int stage = 0; stage < current.stages(); ++stage) {
            std::vector<int> cands = candidates;
            if (std::find(cands.begin(), cands.end(), current.substeps[stage]) == cands.end())
                cands.push_back(current.substeps[stage]);  // incumbent always competes
            int best_cand = current.substeps[stage];
            double best_metric = best;
            for (int c : cands) {
                StageSchedule trial = current;
                trial.substeps[stage] = c;
                double m = (c == current.substeps[stage]) ? best : eval(trial, stage);
                report.trials.push_back({stage, c, m});
                if (m < best_metric) {
                    best_metric = m;
                    best_cand = c;
                }
            }
            current.substeps[stage] = best_cand;
            best = best_metric;
            report.metric_trajectory.push_back(best);
        }
    }
    report.final_schedule = current;
    report.final_metric = best;
    return report;
}

std::pair<double, std::vector<std::pair<double, double>>> scan_scalar(
    const std::function<double(double)>& metric, const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("scan_scalar: empty grid");
    std::vector<std::pair<double, double>> table;
    double best_x = grid[0], best_m = 0.0;
    bool first = true;
    for (double x : grid) {
        double m = metric(x);
        table.emplace_back(x, m);
        if (first || m < best_m) {
            best_m = m;
            best_x = x;
            first = false;
        }
    }
    return {best_x, table};
}

}  // namespace tecswin
