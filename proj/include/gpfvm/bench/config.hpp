#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gpfvm/bench/experiment.hpp"
#include "gpfvm/bench/problems.hpp"
#include "gpfvm/errors.hpp"

namespace gpfvm::bench {

/// Everything a config file describes: the experiment spec plus sweep,
/// search and output settings.
struct Config {
    ProblemSpec spec;
    SearchSpace search;
    std::vector<std::vector<std::size_t>> sweep_n_pde;
    std::vector<ObservationMethod> sweep_methods{ObservationMethod::fvm, ObservationMethod::collocation};
    std::string out_dir = "out";
    bool deterministic = true;
    bool log = false;
};

namespace config_detail {

using boost::property_tree::ptree;

template <class T>
T scalar(const std::string& key, const std::string& text) {
    try {
        return boost::lexical_cast<T>(boost::trim_copy(text));
    } catch (const boost::bad_lexical_cast&) {
        throw ConfigError("cannot parse '" + text + "' for key " + key);
    }
}

template <>
inline bool scalar<bool>(const std::string& key, const std::string& text) {
    const std::string v = boost::to_lower_copy(boost::trim_copy(text));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("cannot parse '" + text + "' as a boolean for key " + key);
}

template <class T>
std::vector<T> list(const std::string& key, const std::string& text, const char* sep = ",") {
    std::vector<std::string> parts;
    boost::split(parts, text, boost::is_any_of(sep));
    std::vector<T> out;
    for (const auto& p : parts) {
        if (boost::trim_copy(p).empty()) continue;
        out.push_back(scalar<T>(key, p));
    }
    return out;
}

/// "lo:hi:n" expands to n uniformly spaced values; otherwise a comma list.
inline std::vector<double> value_list(const std::string& key, const std::string& text) {
    if (text.find(':') == std::string::npos) return list<double>(key, text);
    const auto p = list<double>(key, text, ":");
    if (p.size() != 3 || p[2] < 1 || p[2] != static_cast<double>(static_cast<std::size_t>(p[2])))
        throw ConfigError("range for " + key + " must read lo:hi:n");
    return linspace(p[0], p[1], static_cast<std::size_t>(p[2]));
}

inline const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"problem",
         {"kind", "lo", "hi", "seed", "ibvp_draws", "beta", "wave_speed", "gravity", "coriolis", "drag", "depth_deep",
          "depth_shelf", "shelf_start", "shelf_end", "bump_amplitude", "bump_x", "bump_y", "bump_sx", "bump_sy",
          "ic_points", "bc_times", "bc_points", "target_lo", "target_hi", "target_points"}},
        {"kernel", {"q", "lengthscale", "variance", "search_groups", "search_values", "search_seed_offset"}},
        {"discretization", {"method", "n_pde", "average", "sweep_n_pde", "sweep_methods"}},
        {"solver", {"method", "budget", "tol", "reorthogonalize", "targeted_budget", "coarse_factors"}},
        {"output", {"dir", "test_points", "dump_points", "deterministic", "log"}},
    };
    return keys;
}

}  // namespace config_detail

/// Parses an INI config. Unknown sections or keys are errors; absent keys
/// keep the defaults of the configured problem kind.
inline Config parse_config(std::istream& in) {
    using namespace config_detail;
    ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        const auto it = allowed_keys().find(section);
        if (it == allowed_keys().end()) throw ConfigError("unknown config section [" + section + "]");
        if (!body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
        for (const auto& [key, value] : body)
            if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
    }

    const auto get = [&tree](const std::string& path) -> std::optional<std::string> {
        if (auto v = tree.get_optional<std::string>(path)) return *v;
        return std::nullopt;
    };

    const auto kind = get("problem.kind");
    if (!kind) throw ConfigError("config needs problem.kind");
    Config c;
    c.spec = default_spec(parse_problem_kind(*kind));
    ProblemSpec& s = c.spec;

    const auto set_scalar = [&](const std::string& path, auto& field) {
        if (auto v = get(path)) field = scalar<std::decay_t<decltype(field)>>(path, *v);
    };
    const auto set_list = [&](const std::string& path, auto& field) {
        if (auto v = get(path)) field = list<typename std::decay_t<decltype(field)>::value_type>(path, *v);
    };

    set_list("problem.lo", s.lo);
    set_list("problem.hi", s.hi);
    set_scalar("problem.seed", s.seed);
    set_scalar("problem.ibvp_draws", s.ibvp_draws);
    set_scalar("problem.beta", s.beta);
    set_scalar("problem.wave_speed", s.wave_speed);
    set_scalar("problem.gravity", s.gravity);
    set_scalar("problem.coriolis", s.coriolis);
    set_scalar("problem.drag", s.drag);
    set_scalar("problem.depth_deep", s.bathymetry.deep);
    set_scalar("problem.depth_shelf", s.bathymetry.shelf);
    set_scalar("problem.shelf_start", s.bathymetry.shelf_start);
    set_scalar("problem.shelf_end", s.bathymetry.shelf_end);
    set_scalar("problem.bump_amplitude", s.bump.amplitude);
    set_scalar("problem.bump_x", s.bump.cx);
    set_scalar("problem.bump_y", s.bump.cy);
    set_scalar("problem.bump_sx", s.bump.sx);
    set_scalar("problem.bump_sy", s.bump.sy);
    set_scalar("problem.ic_points", s.ic_points);
    set_scalar("problem.bc_times", s.bc_times);
    set_scalar("problem.bc_points", s.bc_points);
    set_list("problem.target_lo", s.target_lo);
    set_list("problem.target_hi", s.target_hi);
    set_list("problem.target_points", s.target_points);

    set_list("kernel.q", s.kernel.q);
    set_list("kernel.lengthscale", s.kernel.lengthscale);
    set_list("kernel.variance", s.kernel.variance);
    if (auto v = get("kernel.search_groups")) {
        std::vector<std::string> groups;
        boost::split(groups, *v, boost::is_any_of(";"));
        for (const auto& gtext : groups) c.search.groups.push_back(list<std::size_t>("kernel.search_groups", gtext));
    }
    if (auto v = get("kernel.search_values")) {
        std::vector<std::string> groups;
        boost::split(groups, *v, boost::is_any_of(";"));
        for (const auto& gtext : groups) c.search.values.push_back(value_list("kernel.search_values", gtext));
    }
    set_scalar("kernel.search_seed_offset", c.search.seed_offset);

    if (auto v = get("discretization.method")) s.method = parse_observation_method(boost::trim_copy(*v));
    set_list("discretization.n_pde", s.n_pde);
    set_scalar("discretization.average", s.average);
    if (auto v = get("discretization.sweep_n_pde")) {
        std::vector<std::string> cells;
        boost::split(cells, *v, boost::is_any_of(";"));
        for (const auto& ctext : cells) c.sweep_n_pde.push_back(list<std::size_t>("discretization.sweep_n_pde", ctext));
    }
    if (auto v = get("discretization.sweep_methods")) {
        c.sweep_methods.clear();
        for (const auto& m : list<std::string>("discretization.sweep_methods", *v))
            c.sweep_methods.push_back(parse_observation_method(m));
    }

    if (auto v = get("solver.method")) s.solver.method = parse_solver_method(boost::trim_copy(*v));
    set_scalar("solver.budget", s.solver.budget);
    set_scalar("solver.tol", s.solver.tol);
    set_scalar("solver.reorthogonalize", s.solver.reorthogonalize);
    set_scalar("solver.targeted_budget", s.solver.targeted_budget);
    set_list("solver.coarse_factors", s.solver.coarse_factors);

    if (auto v = get("output.dir")) c.out_dir = boost::trim_copy(*v);
    set_scalar("output.test_points", s.test_points);
    set_scalar("output.dump_points", s.dump_points);
    set_scalar("output.deterministic", c.deterministic);
    set_scalar("output.log", c.log);

    s.validate();
    if (!c.search.empty()) c.search.validate(s.dim());
    for (const auto& n : c.sweep_n_pde)
        if (n.size() != s.dim()) throw ConfigError("every sweep_n_pde entry needs one count per dimension");
    return c;
}

inline Config parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

}  // namespace gpfvm::bench
