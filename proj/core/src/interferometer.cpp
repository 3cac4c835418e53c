#include "dipolescope/interferometer.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dipolescope {

void NoiseConfig::validate() const {
    if (classical_amplitude_rms < 0 || classical_phase_rms < 0 || phase_random_walk_rms < 0)
        throw std::invalid_argument("NoiseConfig: rms values must be >= 0");
}

PulseTrainRecord simulate_pulse_train(const ProbePulseConfig& probe,
                                      const PhaseTrajectory& phase, const NoiseConfig& noise,
                                      const AtomicLine& line, const InterferometerConfig& ifo) {
    probe.validate();
    noise.validate();
    if (ifo.visibility <= 0.0 || ifo.visibility > 1.0)
        throw std::invalid_argument("simulate_pulse_train: visibility must be in (0,1]");

    const double n = probe.photon_number(line);
    std::mt19937_64 rng(noise.rng_seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    PulseTrainRecord rec;
    rec.photon_number = n;
    rec.visibility = ifo.visibility;
    rec.fringe_offset = ifo.fringe_offset;
    rec.seed = noise.rng_seed;
    rec.timestamps.reserve(probe.pulse_count);
    rec.areas.reserve(probe.pulse_count);

    double random_walk = 0.0;
    for (int k = 0; k < probe.pulse_count; ++k) {
        const double t = k * probe.period;
        double phi = phase(t) + noise.slow_phase_drift_rate * t;
        if (noise.classical_phase_rms > 0.0) phi += noise.classical_phase_rms * unit(rng);
        if (noise.phase_random_walk_rms > 0.0) {
            random_walk += noise.phase_random_walk_rms * unit(rng);
            phi += random_walk;
        }
        double eps = 0.0;
        if (noise.classical_amplitude_rms > 0.0) eps = noise.classical_amplitude_rms * unit(rng);

        const double fringe = std::cos(ifo.fringe_offset - phi);
        double area;
        if (ifo.balanced) {
            // common-mode power term cancels; amplitude noise rides only on the signal
            area = 0.5 * n * (1.0 + eps) * ifo.visibility * fringe;
            if (noise.shot_noise_enabled) area += std::sqrt(n) * unit(rng);
        } else {
            const double mean = 0.5 * n * (1.0 + eps) * (1.0 + ifo.visibility * fringe);
            area = mean;
            if (noise.shot_noise_enabled) area += std::sqrt(std::max(mean, 0.0)) * unit(rng);
        }
        rec.timestamps.push_back(t);
        rec.areas.push_back(area);
    }
    return rec;
}

double two_point_variance(const PulseTrainRecord& record, int separation) {
    const int count = static_cast<int>(record.size());
    if (separation < 1 || separation >= count)
        throw std::invalid_argument("two_point_variance: need 1 <= m < pulse count");
    double acc = 0.0;
    for (int k = 0; k + separation < count; ++k) {
        const double d = record.areas[k + separation] - record.areas[k];
        acc += d * d;
    }
    return acc / (2.0 * (count - separation));
}

PhaseEstimates phase_from_record(const PulseTrainRecord& record,
                                 const PulseTrainRecord& reference) {
    if (record.size() != reference.size())
        throw std::invalid_argument("phase_from_record: pulse counts differ");
    if (record.photon_number != reference.photon_number)
        throw std::invalid_argument("phase_from_record: photon numbers differ");
    const double scale = 2.0 / (record.photon_number * record.visibility);
    PhaseEstimates est;
    est.phase.reserve(record.size());
    est.clamped.assign(record.size(), 0);
    for (std::size_t k = 0; k < record.size(); ++k) {
        double x = scale * (record.areas[k] - reference.areas[k]);
        if (x > 1.0 || x < -1.0) {
            est.clamped[k] = 1;
            x = std::clamp(x, -1.0, 1.0);
        }
        est.phase.push_back(std::asin(x));
    }
    return est;
}

LogLogSlope noise_scaling_exponent(std::span<const std::pair<double, double>> variance_vs_n) {
    if (variance_vs_n.size() < 3)
        throw std::invalid_argument("noise_scaling_exponent: need >= 3 points");
    double sx = 0, sy = 0;
    for (const auto& [n, var] : variance_vs_n) {
        if (n <= 0.0 || var <= 0.0)
            throw std::invalid_argument("noise_scaling_exponent: points must be positive");
        sx += std::log(n);
        sy += std::log(var);
    }
    const double m = static_cast<double>(variance_vs_n.size());
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0;
    for (const auto& [n, var] : variance_vs_n) {
        const double dx = std::log(n) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(var) - my);
    }
    LogLogSlope fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ssr = 0;
    for (const auto& [n, var] : variance_vs_n) {
        const double r = std::log(var) - (fit.intercept + fit.slope * std::log(n));
        ssr += r * r;
    }
    fit.std_error = m > 2 ? std::sqrt(ssr / (m - 2.0) / sxx) : 0.0;
    return fit;
}

namespace {
std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace

std::string PulseTrainRecord::to_csv() const {
    std::ostringstream out;
    out << "timestamp,area\n";
    for (std::size_t k = 0; k < areas.size(); ++k)
        out << format_double(timestamps[k]) << ',' << format_double(areas[k]) << '\n';
    return out.str();
}

std::string PulseTrainRecord::to_json() const {
    nlohmann::json j;
    j["photon_number"] = photon_number;
    j["visibility"] = visibility;
    j["fringe_offset"] = fringe_offset;
    j["seed"] = seed;
    j["timestamps"] = timestamps;
    j["areas"] = areas;
    return j.dump(2);
}

PulseTrainRecord PulseTrainRecord::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    PulseTrainRecord rec;
    rec.photon_number = j.at("photon_number").get<double>();
    rec.visibility = j.at("visibility").get<double>();
    rec.fringe_offset = j.at("fringe_offset").get<double>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.timestamps = j.at("timestamps").get<std::vector<double>>();
    rec.areas = j.at("areas").get<std::vector<double>>();
    if (rec.timestamps.size() != rec.areas.size())
        throw std::invalid_argument("PulseTrainRecord: timestamp/area length mismatch");
    return rec;
}

}  // namespace dipolescope
