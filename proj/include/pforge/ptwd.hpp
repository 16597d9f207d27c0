#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

// Progressive weight-decay schedule: three phases (no decay, strong decay,
// standard decay) over a training run, with boundaries either fixed as step
// indices (defaulting to thirds) or fired when the loss plateaus. The
// schedule is exported as a plain step -> value table for any trainer.

namespace pforge {

class ScheduleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PtwdSchedule {
    std::uint64_t total_steps = 0;
    double phase_values[3] = {0.0, 0.5, 0.1};
    std::uint64_t boundary1 = 0;
    std::uint64_t boundary2 = 0;

    static PtwdSchedule thirds(std::uint64_t total_steps, double w1 = 0.0, double w2 = 0.5,
                               double w3 = 0.1) {
        PtwdSchedule s;
        s.total_steps = total_steps;
        s.phase_values[0] = w1;
        s.phase_values[1] = w2;
        s.phase_values[2] = w3;
        s.boundary1 = total_steps / 3;
        s.boundary2 = 2 * total_steps / 3;
        return s;
    }

    void validate() const {
        if (!(boundary1 <= boundary2 && boundary2 <= total_steps)) {
            throw ScheduleError("ptwd: boundaries must satisfy 0 <= b1 <= b2 <= total");
        }
        for (const double w : phase_values) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw ScheduleError("ptwd: phase values must be finite and nonnegative");
            }
        }
    }

    double wd_at(std::uint64_t step) const {
        if (step >= total_steps) {
            throw std::out_of_range("ptwd: step " + std::to_string(step) + " out of range");
        }
        if (step < boundary1) return phase_values[0];
        if (step < boundary2) return phase_values[1];
        return phase_values[2];
    }

    void write_csv(std::ostream& out) const {
        out << "step,weight_decay\n";
        char buf[32];
        for (std::uint64_t step = 0; step < total_steps; ++step) {
            std::snprintf(buf, sizeof(buf), "%g", wd_at(step));
            out << step << ',' << buf << '\n';
        }
    }

    void write_csv(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw ScheduleError("cannot write schedule: " + path.string());
        write_csv(out);
        if (!out) throw ScheduleError("write failed: " + path.string());
    }

    nlohmann::json to_json() const {
        return {{"total_steps", total_steps},
                {"phase_values", {phase_values[0], phase_values[1], phase_values[2]}},
                {"boundaries", {boundary1, boundary2}}};
    }

    static PtwdSchedule from_json(const nlohmann::json& j) {
        PtwdSchedule s;
        try {
            s.total_steps = j.at("total_steps").get<std::uint64_t>();
            if (j.contains("phase_values")) {
                const auto& values = j.at("phase_values");
                for (int i = 0; i < 3; ++i) s.phase_values[i] = values.at(i).get<double>();
            }
            if (j.contains("boundaries")) {
                s.boundary1 = j.at("boundaries").at(0).get<std::uint64_t>();
                s.boundary2 = j.at("boundaries").at(1).get<std::uint64_t>();
            } else {
                s.boundary1 = s.total_steps / 3;
                s.boundary2 = 2 * s.total_steps / 3;
            }
        } catch (const nlohmann::json::exception& e) {
            throw ScheduleError("invalid schedule json: " + std::string(e.what()));
        }
        s.validate();
        return s;
    }
};

struct PlateauParams {
    std::uint32_t window = 50;
    double slope_tolerance = 1e-4;
    std::uint64_t min_phase_len = 0;
    std::uint64_t max_phase_len = 0; // 0 = no forced boundary
};

// Least-squares slope of y over x = 0..n-1.
inline double loss_slope(const std::deque<double>& window) {
    const std::size_t n = window.size();
    const double xbar = static_cast<double>(n - 1) / 2.0;
    double ybar = 0.0;
    for (const double y : window) ybar += y;
    ybar /= static_cast<double>(n);

    double num = 0.0, den = 0.0;
    std::size_t i = 0;
    for (const double y : window) {
        const double dx = static_cast<double>(i++) - xbar;
        num += dx * (y - ybar);
        den += dx * dx;
    }
    return num / den;
}

// Loss-driven variant: with plateau triggering enabled, a phase boundary
// fires at the first step where the windowed least-squares slope of the
// losses is flat or rising (> -tolerance), never earlier than the minimum
// phase length. With triggering disabled it follows the fixed schedule.
class PtwdController {
public:
    explicit PtwdController(PtwdSchedule schedule)
        : schedule_(schedule) {
        schedule_.validate();
    }

    PtwdController(PtwdSchedule schedule, PlateauParams plateau)
        : schedule_(schedule), plateau_(plateau) {
        schedule_.validate();
        if (plateau.window < 2) throw ScheduleError("ptwd: plateau window must be >= 2");
    }

    // Consumes the loss observed at `step` (fed in order) and returns the
    // weight decay in effect at that step.
    double advance(std::uint64_t step, double loss) {
        if (!std::isfinite(loss)) throw ScheduleError("ptwd: non-finite loss");
        if (step >= schedule_.total_steps) {
            throw std::out_of_range("ptwd: step out of range");
        }

        if (!plateau_.has_value()) return schedule_.wd_at(step);

        ++steps_in_phase_;
        window_.push_back(loss);
        if (window_.size() > plateau_->window) window_.pop_front();

        if (phase_ < 2 && should_fire()) {
            if (phase_ == 0) fired_boundary1_ = step;
            else fired_boundary2_ = step;
            ++phase_;
            steps_in_phase_ = 0;
            window_.clear();
        }
        return schedule_.phase_values[phase_];
    }

    int phase() const noexcept { return phase_; }
    std::optional<std::uint64_t> fired_boundary1() const noexcept { return fired_boundary1_; }
    std::optional<std::uint64_t> fired_boundary2() const noexcept { return fired_boundary2_; }

private:
    bool should_fire() const {
        if (plateau_->max_phase_len > 0 && steps_in_phase_ >= plateau_->max_phase_len) {
            return true;
        }
        if (steps_in_phase_ < plateau_->min_phase_len) return false;
        if (window_.size() < plateau_->window) return false;
        return loss_slope(window_) > -plateau_->slope_tolerance;
    }

    PtwdSchedule schedule_;
    std::optional<PlateauParams> plateau_;
    int phase_ = 0;
    std::uint64_t steps_in_phase_ = 0;
    std::deque<double> window_;
    std::optional<std::uint64_t> fired_boundary1_;
    std::optional<std::uint64_t> fired_boundary2_;
};

} // namespace pforge
