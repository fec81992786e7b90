#pragma once

#include "opaug/augmentation.hpp"
#include "opaug/bounds.hpp"
#include "opaug/environments.hpp"
#include "opaug/oracle.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace opaug {

// One experiment configuration: an environment, a list of sample sizes, the
// evaluation norm, and the Monte-Carlo budget. Parsed from a flat key=value
// file with a versioned schema; unknown keys are rejected.
struct SweepConfig {
    EnvConfig env;
    std::vector<std::int64_t> n_values{4, 8, 16, 32, 64};
    NormKind norm_kind = NormKind::Residual;
    std::int64_t trials = 1000;
    int realizations = 60;
    std::uint64_t master_seed = 0;
    std::string output_path = "out.csv";
    std::set<std::string> factor_modes{"plugin"};
    std::int64_t bootstrap_l = 1000;
    RewardNoiseMode reward_noise = RewardNoiseMode::Trace;
    RewardCovMode sigma_tilde = RewardCovMode::Oracle;
    std::int64_t diag_n = 8;  // sample size for diagnose / bounds
    int threads = 1;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(trim(item));
    return parts;
}

inline std::int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const std::int64_t r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for key '" + key + "': " + v);
    }
}

inline double parse_real(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad real for key '" + key + "': " + v);
    }
}

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::string fmt_opt(const std::optional<double>& x) {
    return x ? fmt17(*x) : std::string("NA");
}

}  // namespace detail

inline SweepConfig parse_config(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config: expected key = value: " + line);
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (kv.count(key)) throw ConfigError("config: duplicate key: " + key);
        kv[key] = value;
    }

    auto take = [&](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };

    const auto schema = take("schema_version");
    if (!schema || *schema != "1")
        throw ConfigError("config: missing or unsupported schema_version (expected 1)");

    SweepConfig cfg;
    if (auto v = take("env")) {
        if (*v == "circle") cfg.env.family = EnvFamily::Circle;
        else if (*v == "torus") cfg.env.family = EnvFamily::Torus;
        else if (*v == "random_dense") cfg.env.family = EnvFamily::RandomDense;
        else if (*v == "random_sparse") cfg.env.family = EnvFamily::RandomSparse;
        else throw ConfigError("config: unknown env: " + *v);
    }
    if (auto v = take("size")) cfg.env.size = static_cast<int>(detail::parse_int(*v, "size"));
    if (auto v = take("sigma")) cfg.env.sigma = static_cast<int>(detail::parse_int(*v, "sigma"));
    if (auto v = take("delta")) cfg.env.delta = detail::parse_real(*v, "delta");
    if (auto v = take("gamma")) cfg.env.gamma = detail::parse_real(*v, "gamma");
    if (auto v = take("env_seed"))
        cfg.env.seed = static_cast<std::uint64_t>(detail::parse_int(*v, "env_seed"));
    if (auto v = take("n_values")) {
        cfg.n_values.clear();
        for (const auto& part : detail::split(*v, ','))
            cfg.n_values.push_back(detail::parse_int(part, "n_values"));
        if (cfg.n_values.empty()) throw ConfigError("config: n_values must be nonempty");
    }
    if (auto v = take("norm")) {
        if (*v == "residual") cfg.norm_kind = NormKind::Residual;
        else if (*v == "l2_exact") cfg.norm_kind = NormKind::L2Exact;
        else if (*v == "l2_plugin") cfg.norm_kind = NormKind::L2PlugIn;
        else throw ConfigError("config: unknown norm: " + *v);
    }
    if (auto v = take("trials")) cfg.trials = detail::parse_int(*v, "trials");
    if (auto v = take("realizations"))
        cfg.realizations = static_cast<int>(detail::parse_int(*v, "realizations"));
    if (auto v = take("master_seed"))
        cfg.master_seed = static_cast<std::uint64_t>(detail::parse_int(*v, "master_seed"));
    if (auto v = take("output")) cfg.output_path = *v;
    if (auto v = take("factor_modes")) {
        cfg.factor_modes.clear();
        for (const auto& mode : detail::split(*v, ',')) {
            if (mode != "plugin" && mode != "oracle_circ" && mode != "oracle_star" &&
                mode != "bootstrap")
                throw ConfigError("config: unknown factor mode: " + mode);
            cfg.factor_modes.insert(mode);
        }
    }
    if (auto v = take("bootstrap_l")) cfg.bootstrap_l = detail::parse_int(*v, "bootstrap_l");
    if (auto v = take("reward_noise")) {
        if (*v == "trace") cfg.reward_noise = RewardNoiseMode::Trace;
        else if (*v == "sample") cfg.reward_noise = RewardNoiseMode::Sample;
        else throw ConfigError("config: unknown reward_noise mode: " + *v);
    }
    if (auto v = take("sigma_tilde")) {
        if (*v == "oracle") cfg.sigma_tilde = RewardCovMode::Oracle;
        else if (*v == "sample") cfg.sigma_tilde = RewardCovMode::Sample;
        else throw ConfigError("config: unknown sigma_tilde mode: " + *v);
    }
    if (auto v = take("n")) cfg.diag_n = detail::parse_int(*v, "n");

    if (!kv.empty()) throw ConfigError("config: unknown key: " + kv.begin()->first);
    if (cfg.trials < 2) throw ConfigError("config: trials must be >= 2");
    if (cfg.realizations < 1) throw ConfigError("config: realizations must be >= 1");
    for (auto n : cfg.n_values)
        if (n < 1) throw ConfigError("config: n values must be >= 1");
    return cfg;
}

inline SweepConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    return parse_config(in);
}

// One CSV row per (n, realization) cell.
struct SweepRecord {
    std::int64_t n = 0;
    int realization = 0;
    std::uint64_t cell_seed = 0;
    std::optional<double> epsilon_plugin, epsilon_circ, epsilon_star, epsilon_star_se,
        epsilon_boot;
    std::optional<double> mse_naive, mse_plugin, mse_circ, mse_boot;
    std::optional<double> eta_plugin, eta_circ, eta_boot;
    std::optional<double> normalized_mse_naive, normalized_mse_plugin;
    bool basic_applicable = false;
    double basic_upper = 0.0;
    bool spread_applicable = false;
    double spread_upper = 0.0;
    int bound_violation = 0;
    std::string error;  // degenerate-instance note, recorded not fatal
};

namespace detail {

inline SweepRecord run_cell(const SweepConfig& cfg, const InducedModel& model, std::int64_t n,
                            int realization, std::uint64_t cell_index) {
    SweepRecord rec;
    rec.n = n;
    rec.realization = realization;
    rec.cell_seed = cell_index;
    const RandomStream cell_rng(cfg.master_seed, cell_index);
    RandomStream est_rng = cell_rng.substream(0);
    const RandomStream mc_rng = cell_rng.substream(1);
    RandomStream boot_rng = cell_rng.substream(2);

    const NormSpec norm{cfg.norm_kind, {}};
    const auto est = sample_estimated_model(model, n, est_rng, cfg.sigma_tilde);
    const auto stats =
        mc_sufficient_stats(model, n, cfg.trials, norm, mc_rng, cfg.reward_noise);
    const auto curve = curve_from_stats(stats, {});
    const double mse_at_1 = curve.a0 + curve.a1 + curve.a2;
    rec.mse_naive = mse_at_1;
    if (stats.b_m_sq > 0.0) rec.normalized_mse_naive = mse_at_1 / stats.b_m_sq;

    auto mse_at = [&](double eps) { return curve.a0 + curve.a1 * eps + curve.a2 * eps * eps; };
    auto eta_at = [&](double eps) -> std::optional<double> {
        if (mse_at_1 <= 0.0) return std::nullopt;  // degenerate, NA sentinel
        return (mse_at_1 - mse_at(eps)) / mse_at_1;
    };

    if (cfg.factor_modes.count("plugin")) {
        try {
            const auto rep = plugin_factor(est, norm);
            rec.epsilon_plugin = rep.epsilon_tilde;
            rec.mse_plugin = mse_at(*rep.epsilon_tilde);
            rec.eta_plugin = eta_at(*rep.epsilon_tilde);
            if (stats.b_m_sq > 0.0) rec.normalized_mse_plugin = *rec.mse_plugin / stats.b_m_sq;
        } catch (const DegenerateInstance& e) {
            rec.error = e.what();
        }
    }
    if (cfg.factor_modes.count("oracle_circ")) {
        try {
            const double eps = theta(model.transition, model.reward,
                                     model.reward_cov / static_cast<double>(n), n,
                                     model.discount, norm);
            rec.epsilon_circ = eps;
            rec.mse_circ = mse_at(eps);
            rec.eta_circ = eta_at(eps);
        } catch (const DegenerateInstance& e) {
            rec.error = e.what();
        }
    }
    if (cfg.factor_modes.count("oracle_star")) {
        try {
            const auto star = ratio_from_stats(stats);
            rec.epsilon_star = star.value;
            rec.epsilon_star_se = star.std_error;
        } catch (const DegenerateInstance& e) {
            rec.error = e.what();
        }
    }
    if (cfg.factor_modes.count("bootstrap")) {
        try {
            const double eps = bootstrap_factor(est, cfg.bootstrap_l, norm, boot_rng);
            rec.epsilon_boot = eps;
            rec.mse_boot = mse_at(eps);
            rec.eta_boot = eta_at(eps);
        } catch (const DegenerateInstance& e) {
            rec.error = e.what();
        }
    }

    const auto basic = basic_bounds(model.discount, n);
    rec.basic_applicable = basic.upper_applies;
    rec.basic_upper = basic.upper_bound;
    try {
        const auto spread = spread_bound(model.transition, model.reward, model.discount, n);
        rec.spread_applicable = spread.applicable;
        rec.spread_upper = spread.upper_bound;
    } catch (const InvalidArgument&) {
        rec.spread_applicable = false;
    }
    if (rec.epsilon_plugin) {
        const double eps = *rec.epsilon_plugin;
        if (basic.positivity_applies && eps <= 0.0) rec.bound_violation = 1;
        if (basic.upper_applies && eps > basic.upper_bound) rec.bound_violation = 1;
        if (rec.spread_applicable && eps > rec.spread_upper) rec.bound_violation = 1;
    }
    return rec;
}

inline void write_metadata(std::ostream& out, const SweepConfig& cfg, const char* kind) {
    out << "# opaug " << kind << " v1\n";
    out << "# schema_version=1\n";
    out << "# env=" << env_family_name(cfg.env.family) << " size=" << cfg.env.size
        << " sigma=" << cfg.env.sigma << " delta=" << fmt17(cfg.env.delta)
        << " gamma=" << fmt17(cfg.env.gamma) << " env_seed=" << cfg.env.seed << "\n";
    out << "# norm=" << norm_kind_name(cfg.norm_kind) << "\n";
    out << "# master_seed=" << cfg.master_seed << "\n";
    out << "# trials=" << cfg.trials << " realizations=" << cfg.realizations << "\n";
    out << "# normalization=b_m_sq\n";
}

// Deterministic cell scheduler: worker count changes only the wall-clock,
// never the records, because every cell owns its substream and the output
// is reduced in cell order.
inline std::vector<SweepRecord> run_cells(const SweepConfig& cfg, const InducedModel& model) {
    const std::size_t cells = cfg.n_values.size() * static_cast<std::size_t>(cfg.realizations);
    std::vector<SweepRecord> records(cells);
    const int workers = std::max(1, cfg.threads);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            const std::size_t ni = c / static_cast<std::size_t>(cfg.realizations);
            const int realization = static_cast<int>(c % static_cast<std::size_t>(cfg.realizations));
            records[c] = run_cell(cfg, model, cfg.n_values[ni], realization,
                                  static_cast<std::uint64_t>(c));
        }
    };
    if (workers == 1) {
        work(0, cells);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (cells + static_cast<std::size_t>(workers) - 1) /
                                  static_cast<std::size_t>(workers);
        for (int w = 0; w < workers; ++w) {
            const std::size_t begin = static_cast<std::size_t>(w) * chunk;
            const std::size_t end = std::min(cells, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(work, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    return records;
}

}  // namespace detail

inline void run_sweep(const SweepConfig& cfg, std::ostream& out) {
    const InducedModel model = make_induced_model(cfg.env);
    const auto records = detail::run_cells(cfg, model);
    detail::write_metadata(out, cfg, "sweep");
    out << "family,size,sigma,delta,gamma,norm,n,realization,seed,"
           "epsilon_plugin,epsilon_circ,epsilon_star,epsilon_star_se,epsilon_boot,"
           "mse_naive,mse_plugin,mse_circ,mse_boot,"
           "eta_plugin,eta_circ,eta_boot,"
           "normalized_mse_naive,normalized_mse_plugin,"
           "bound_basic_applicable,bound_basic_upper,bound_spread_applicable,"
           "bound_spread_upper,bound_violation,note\n";
    using detail::fmt17;
    using detail::fmt_opt;
    for (const auto& r : records) {
        out << env_family_name(cfg.env.family) << ',' << cfg.env.size << ',' << cfg.env.sigma
            << ',' << fmt17(cfg.env.delta) << ',' << fmt17(cfg.env.gamma) << ','
            << norm_kind_name(cfg.norm_kind) << ',' << r.n << ',' << r.realization << ','
            << r.cell_seed << ',' << fmt_opt(r.epsilon_plugin) << ',' << fmt_opt(r.epsilon_circ)
            << ',' << fmt_opt(r.epsilon_star) << ',' << fmt_opt(r.epsilon_star_se) << ','
            << fmt_opt(r.epsilon_boot) << ',' << fmt_opt(r.mse_naive) << ','
            << fmt_opt(r.mse_plugin) << ',' << fmt_opt(r.mse_circ) << ',' << fmt_opt(r.mse_boot)
            << ',' << fmt_opt(r.eta_plugin) << ',' << fmt_opt(r.eta_circ) << ','
            << fmt_opt(r.eta_boot) << ',' << fmt_opt(r.normalized_mse_naive) << ','
            << fmt_opt(r.normalized_mse_plugin) << ',' << (r.basic_applicable ? 1 : 0) << ','
            << fmt17(r.basic_upper) << ',' << (r.spread_applicable ? 1 : 0) << ','
            << fmt17(r.spread_upper) << ',' << r.bound_violation << ','
            << (r.error.empty() ? "NA" : r.error) << '\n';
    }
}

inline void run_scatter(const SweepConfig& cfg, std::ostream& out) {
    const InducedModel model = make_induced_model(cfg.env);
    SweepConfig local = cfg;
    local.factor_modes = {"plugin"};
    const auto records = detail::run_cells(local, model);
    detail::write_metadata(out, cfg, "scatter");
    out << "family,size,sigma,delta,gamma,norm,n,realization,seed,"
           "normalized_mse_naive,normalized_mse_augmented\n";
    using detail::fmt17;
    using detail::fmt_opt;
    for (const auto& r : records) {
        if (!r.normalized_mse_naive || !r.normalized_mse_plugin) continue;  // zero-MSE cells
        out << env_family_name(cfg.env.family) << ',' << cfg.env.size << ',' << cfg.env.sigma
            << ',' << fmt17(cfg.env.delta) << ',' << fmt17(cfg.env.gamma) << ','
            << norm_kind_name(cfg.norm_kind) << ',' << r.n << ',' << r.realization << ','
            << r.cell_seed << ',' << fmt_opt(r.normalized_mse_naive) << ','
            << fmt_opt(r.normalized_mse_plugin) << '\n';
    }
}

// Single-instance deep dive: every factor, every bound, the spectral radius
// of the realized perturbation, and the moment scalars, cross-consistent.
inline void diagnose(const SweepConfig& cfg, std::ostream& text, std::ostream& csv) {
    const InducedModel model = make_induced_model(cfg.env);
    const std::int64_t n = cfg.diag_n;
    const NormSpec norm{cfg.norm_kind, {}};
    const RandomStream cell_rng(cfg.master_seed, 0);
    RandomStream est_rng = cell_rng.substream(0);
    const RandomStream mc_rng = cell_rng.substream(1);
    RandomStream boot_rng = cell_rng.substream(2);

    const auto est = sample_estimated_model(model, n, est_rng, cfg.sigma_tilde);
    const auto moments = compute_moments(model.transition, model.reward,
                                         model.reward_cov / static_cast<double>(n), n,
                                         model.discount, norm);
    const auto circ = detail::theta_from_moments(moments);
    const auto plug = plugin_factor(est, norm);
    const auto star = mc_epsilon_star(model, n, cfg.trials, norm, mc_rng, cfg.reward_noise);
    const double boot = bootstrap_factor(est, cfg.bootstrap_l, norm, boot_rng);

    const BellmanOperator op(model.transition, model.discount);
    const auto pert = make_perturbation(op, model.transition, est.transition_hat, model.discount);
    const auto bounds = bounds_report(model.transition, model.reward, model.discount, n, 1.0, 2,
                                      &pert);

    std::vector<std::pair<std::string, std::string>> rows;
    using detail::fmt17;
    rows.emplace_back("n", std::to_string(n));
    rows.emplace_back("epsilon_circ", fmt17(circ.value));
    rows.emplace_back("epsilon_tilde", fmt17(*plug.epsilon_tilde));
    rows.emplace_back("epsilon_star_mc", fmt17(star.value));
    rows.emplace_back("epsilon_star_mc_se", fmt17(star.std_error));
    rows.emplace_back("epsilon_boot", fmt17(boot));
    rows.emplace_back("g_scalar", fmt17(moments.g_scalar));
    rows.emplace_back("h_scalar", fmt17(moments.h_scalar));
    rows.emplace_back("t_scalar", fmt17(moments.t_scalar));
    rows.emplace_back("b_m_sq", fmt17(moments.b_m_sq));
    rows.emplace_back("n_positive_threshold", fmt17(bounds.n_positive_threshold));
    rows.emplace_back("n_upper_threshold", fmt17(bounds.n_upper_threshold));
    rows.emplace_back("upper_bound_basic", fmt17(bounds.upper_bound_basic));
    rows.emplace_back("p_max", fmt17(bounds.p_max));
    rows.emplace_back("b_max", fmt17(bounds.b_max));
    rows.emplace_back("spread_condition", fmt17(bounds.spread_condition));
    rows.emplace_back("spread_applicable", bounds.spread_applicable ? "1" : "0");
    rows.emplace_back("upper_bound_spread", fmt17(bounds.upper_bound_spread));
    rows.emplace_back("kappa", std::to_string(bounds.kappa));
    rows.emplace_back("neumann_n_required", std::to_string(bounds.neumann_n_required));
    rows.emplace_back("spectral_radius_yhat", fmt17(*bounds.spectral_radius));
    rows.emplace_back("log_base", "natural");

    detail::write_metadata(csv, cfg, "diagnose");
    csv << "key,value\n";
    for (const auto& [k, v] : rows) csv << k << ',' << v << '\n';
    for (const auto& [k, v] : rows) text << k << " = " << v << '\n';
}

inline void bounds_command(const SweepConfig& cfg, std::ostream& text, std::ostream& csv) {
    const InducedModel model = make_induced_model(cfg.env);
    const auto rep =
        bounds_report(model.transition, model.reward, model.discount, cfg.diag_n, 1.0, 2);
    std::vector<std::pair<std::string, std::string>> rows;
    using detail::fmt17;
    rows.emplace_back("n", std::to_string(cfg.diag_n));
    rows.emplace_back("n_positive_threshold", fmt17(rep.n_positive_threshold));
    rows.emplace_back("n_upper_threshold", fmt17(rep.n_upper_threshold));
    rows.emplace_back("upper_bound_basic", fmt17(rep.upper_bound_basic));
    rows.emplace_back("p_max", fmt17(rep.p_max));
    rows.emplace_back("b_max", fmt17(rep.b_max));
    rows.emplace_back("spread_condition", fmt17(rep.spread_condition));
    rows.emplace_back("spread_applicable", rep.spread_applicable ? "1" : "0");
    rows.emplace_back("upper_bound_spread", fmt17(rep.upper_bound_spread));
    rows.emplace_back("kappa", std::to_string(rep.kappa));
    rows.emplace_back("neumann_n_required", std::to_string(rep.neumann_n_required));
    rows.emplace_back("log_base", "natural");
    detail::write_metadata(csv, cfg, "bounds");
    csv << "key,value\n";
    for (const auto& [k, v] : rows) csv << k << ',' << v << '\n';
    for (const auto& [k, v] : rows) text << k << " = " << v << '\n';
}

}  // namespace opaug
