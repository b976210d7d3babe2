// rhomix command-line tool: compute, verify, simulate and emit plot-ready data.
#include "io.hpp"
#include "verify.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

using rhomix::ErrorKind;
using rhomix::Index;
using rhomix::Matrix;
using rhomix::require;
using rhomix::io::json;

constexpr int exit_validation = 2;
constexpr int exit_unknown_command = 64;

/** @brief Options shared by every subcommand. */
struct RunConfig {
    bool dry_run = false;
    std::string format = "json";
    std::string output;
    std::uint64_t seed = 0;
    int threads = 0;
};

void add_common(CLI::App* sub, RunConfig& cfg)
{
    sub->add_flag("--dry-run", cfg.dry_run, "Validate inputs and exit without computing");
    sub->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--output,-o", cfg.output, "Output file (default: stdout)");
    sub->add_option("--seed", cfg.seed, "Random seed (default 0)");
    sub->add_option("--threads", cfg.threads, "Worker threads (default: $RHOMIX_THREADS or 1)");
}

int resolve_threads(int requested)
{
    if (requested == 0) {
        if (const char* env = std::getenv("RHOMIX_THREADS")) {
            try {
                requested = std::stoi(env);
            } catch (const std::exception&) {
                throw rhomix::Error(ErrorKind::invalid_input, "RHOMIX_THREADS must be a positive integer");
            }
        } else {
            requested = 1;
        }
    }
    require(requested >= 1, ErrorKind::invalid_input, "threads must be >= 1");
    return requested;
}

void emit(const RunConfig& cfg, const json& j)
{
    rhomix::io::Sink sink(cfg.output);
    rhomix::io::write_json(sink.out(), j);
    sink.out() << "\n";
}

void emit_dry(const RunConfig& cfg, const std::string& command)
{
    emit(cfg, json{{"command", command}, {"valid", true}});
}

/** Variable references by index or by name. */
std::vector<int> resolve_vars(const std::vector<std::string>& refs, const std::vector<std::string>& names, const char* what)
{
    std::vector<int> out;
    for (const auto& r : refs) {
        auto it = std::find(names.begin(), names.end(), r);
        if (it != names.end()) {
            out.push_back(int(it - names.begin()));
            continue;
        }
        std::size_t used = 0;
        int v = -1;
        try {
            v = std::stoi(r, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        require(used == r.size() && v >= 0 && v < int(names.size()), ErrorKind::invalid_input,
                std::string(what) + ": unknown variable '" + r + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> system_names(const rhomix::FiniteSystem& sys)
{
    std::vector<std::string> n;
    for (std::size_t i = 0; i < sys.num_vars(); ++i) n.push_back(sys.vars()[i].name);
    return n;
}

std::vector<std::string> gaussian_names(const rhomix::GaussianSystem& g)
{
    std::vector<std::string> n = g.labels;
    for (Index i = Index(n.size()); i < g.cov.rows(); ++i) n.push_back(std::to_string(i));
    return n;
}

std::vector<Index> to_index(const std::vector<int>& v) { return std::vector<Index>(v.begin(), v.end()); }

/** "a,b;c,d" -> matrix */
Matrix parse_rows(const std::string& s)
{
    std::vector<std::vector<double>> rows(1);
    std::string cell;
    auto flush = [&] {
        require(!cell.empty(), ErrorKind::invalid_input, "empty matrix entry");
        rows.back().push_back(rhomix::io::parse_number(json(cell)));
        cell.clear();
    };
    for (char ch : s) {
        if (ch == ',') {
            flush();
        } else if (ch == ';') {
            flush();
            rows.emplace_back();
        } else if (ch != ' ') {
            cell += ch;
        }
    }
    flush();
    Matrix m(Index(rows.size()), Index(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require(rows[r].size() == rows[0].size(), ErrorKind::invalid_input, "matrix rows must have equal length");
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(Index(r), Index(c)) = rows[r][c];
    }
    return m;
}

/** Fully connected +-1 spin cluster with coupling J. */
rhomix::FiniteSystem spin_cluster(int spins, double J)
{
    require(spins >= 1 && spins <= 12, ErrorKind::size_cap, "spin clusters need 1..12 spins");
    require(std::isfinite(J), ErrorKind::invalid_input, "coupling must be finite");
    return rhomix::verify::detail::spin_cluster(spins, J);
}

const char* branch_name(rhomix::ChogosovBranch b)
{
    switch (b) {
    case rhomix::ChogosovBranch::D: return "D";
    case rhomix::ChogosovBranch::U: return "U";
    default: return "interior";
    }
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::string> commands = {"maxcorr", "subjective",  "mixing",       "tensor-bound", "event-bound",
                                               "chogosov", "glauber-gap", "glauber-sim",  "ising",        "quadratic",
                                               "conv-inverse", "clt",     "ou-chain",     "three-lines",  "verify-all"};
    CLI::App app{"Maximal correlation and rho-mixing toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "rhomix 1.0");

    if (argc > 1) {
        std::string first = argv[1];
        bool option = !first.empty() && first[0] == '-';
        if (!option && std::find(commands.begin(), commands.end(), first) == commands.end()) {
            std::cerr << "unknown command '" << first << "'\n\nusage: rhomix <command> [options]\ncommands:";
            for (const auto& c : commands) std::cerr << " " << c;
            std::cerr << "\n";
            return exit_unknown_command;
        }
    }

    RunConfig cfg;
    std::function<void()> run;

    // ---- maxcorr
    std::string pair_path, system_path, gaussian_path, kernel_path;
    std::vector<std::string> I_ref, J_ref, K_ref, pool_ref;
    bool has_pool = false;
    {
        auto* s = app.add_subcommand("maxcorr", "Maximal correlation of a pair, system blocks, or Gaussian blocks");
        add_common(s, cfg);
        auto* src = s->add_option_group("source");
        src->add_option("--pair", pair_path, "Pair JSON")->check(CLI::ExistingFile);
        src->add_option("--system", system_path, "System JSON")->check(CLI::ExistingFile);
        src->add_option("--gaussian", gaussian_path, "Covariance JSON")->check(CLI::ExistingFile);
        src->require_option(1);
        s->add_option("--I", I_ref, "First block (indices or names)")->delimiter(',');
        s->add_option("--J", J_ref, "Second block (indices or names)")->delimiter(',');
        s->add_option("--given", K_ref, "Conditioning block (Gaussian only)")->delimiter(',');
        s->callback([&] {
            run = [&] {
                json out;
                if (!pair_path.empty()) {
                    auto p = rhomix::io::read_pair(rhomix::io::load_json(pair_path));
                    if (cfg.dry_run) return emit_dry(cfg, "maxcorr");
                    auto r = rhomix::maxcorr_pair(p);
                    out = {{"rho", r.rho}, {"f", rhomix::io::to_json(r.optimal_f)},
                           {"g", rhomix::io::to_json(r.optimal_g)}, {"density_bound", rhomix::density_bound(p)}};
                } else if (!system_path.empty()) {
                    auto sys = rhomix::io::read_system(rhomix::io::load_json(system_path));
                    auto names = system_names(sys);
                    auto I = resolve_vars(I_ref, names, "--I"), J = resolve_vars(J_ref, names, "--J");
                    require(!I.empty() && !J.empty(), ErrorKind::invalid_input, "--I and --J are required with --system");
                    require(!rhomix::detail::intersects(I, J), ErrorKind::overlap, "I and J must be disjoint");
                    if (cfg.dry_run) return emit_dry(cfg, "maxcorr");
                    out = {{"rho", rhomix::maxcorr_blocks(sys, I, J)}};
                } else {
                    auto g = rhomix::io::read_gaussian(rhomix::io::load_json(gaussian_path));
                    auto names = gaussian_names(g);
                    auto I = to_index(resolve_vars(I_ref, names, "--I")), J = to_index(resolve_vars(J_ref, names, "--J"));
                    auto K = to_index(resolve_vars(K_ref, names, "--given"));
                    require(!I.empty() && !J.empty(), ErrorKind::invalid_input, "--I and --J are required with --gaussian");
                    if (cfg.dry_run) return emit_dry(cfg, "maxcorr");
                    out = {{"rho", K.empty() ? rhomix::maxcorr_gaussian(g, I, J) : rhomix::conditional_maxcorr(g, I, J, K)}};
                }
                emit(cfg, out);
            };
        });
    }

    // ---- subjective
    {
        auto* s = app.add_subcommand("subjective", "Subjective maximal correlation over conditionings on a pool");
        add_common(s, cfg);
        auto* src = s->add_option_group("source");
        src->add_option("--system", system_path, "System JSON")->check(CLI::ExistingFile);
        src->add_option("--gaussian", gaussian_path, "Covariance JSON")->check(CLI::ExistingFile);
        src->require_option(1);
        s->add_option("--I", I_ref, "First block")->delimiter(',')->required();
        s->add_option("--J", J_ref, "Second block")->delimiter(',')->required();
        auto* po = s->add_option("--pool", pool_ref, "Conditioning pool (default: every other variable)")->delimiter(',');
        s->callback([&, po] {
            has_pool = po->count() > 0;
            run = [&] {
                if (!system_path.empty()) {
                    auto sys = rhomix::io::read_system(rhomix::io::load_json(system_path));
                    auto names = system_names(sys);
                    auto I = resolve_vars(I_ref, names, "--I"), J = resolve_vars(J_ref, names, "--J");
                    std::vector<int> both = I;
                    both.insert(both.end(), J.begin(), J.end());
                    auto pool = has_pool ? resolve_vars(pool_ref, names, "--pool") : rhomix::complement_pool(sys, both);
                    require(!rhomix::detail::intersects(I, J), ErrorKind::overlap, "I and J must be disjoint");
                    require(pool.size() <= rhomix::max_conditioning_pool, ErrorKind::size_cap, "pool exceeds 12 variables");
                    if (cfg.dry_run) return emit_dry(cfg, "subjective");
                    auto r = rhomix::subjective_maxcorr_detail(sys, I, J, pool);
                    json cond = json::object();
                    for (std::size_t k = 0; k < r.conditioned.size(); ++k)
                        cond[names[std::size_t(r.conditioned[k])]] = r.values[k];
                    emit(cfg, {{"value", r.value}, {"conditioning", cond}});
                    return;
                }
                auto g = rhomix::io::read_gaussian(rhomix::io::load_json(gaussian_path));
                auto names = gaussian_names(g);
                auto I = resolve_vars(I_ref, names, "--I"), J = resolve_vars(J_ref, names, "--J");
                std::vector<int> pool;
                if (has_pool) {
                    pool = resolve_vars(pool_ref, names, "--pool");
                } else {
                    for (int v = 0; v < int(names.size()); ++v)
                        if (std::find(I.begin(), I.end(), v) == I.end() && std::find(J.begin(), J.end(), v) == J.end())
                            pool.push_back(v);
                }
                require(pool.size() <= rhomix::max_conditioning_pool, ErrorKind::size_cap, "pool exceeds 12 variables");
                if (cfg.dry_run) return emit_dry(cfg, "subjective");
                // Gaussian conditional correlations do not depend on the conditioning values
                double best = 0.0;
                std::vector<std::string> arg;
                for (std::size_t mask = 0; mask < (std::size_t(1) << pool.size()); ++mask) {
                    std::vector<Index> K;
                    for (std::size_t b = 0; b < pool.size(); ++b)
                        if (mask >> b & 1u) K.push_back(pool[b]);
                    double v = rhomix::conditional_maxcorr(g, to_index(I), to_index(J), K);
                    if (v > best) {
                        best = v;
                        arg.clear();
                        for (Index k : K) arg.push_back(names[std::size_t(k)]);
                    }
                }
                emit(cfg, {{"value", best}, {"conditioning", arg}});
            };
        });
    }

    // ---- mixing
    std::string markov_path;
    int steps = 5;
    {
        auto* s = app.add_subcommand("mixing", "Mixing coefficients of a pair, or correlations along a Markov chain");
        add_common(s, cfg);
        auto* src = s->add_option_group("source");
        src->add_option("--pair", pair_path, "Pair JSON")->check(CLI::ExistingFile);
        src->add_option("--markov", markov_path, "Transition matrix JSON {\"P\": [[...]], \"layout\": \"columns|rows\"}")
            ->check(CLI::ExistingFile);
        src->require_option(1);
        s->add_option("--steps", steps, "Number of chain steps")->check(CLI::PositiveNumber);
        s->callback([&] {
            run = [&] {
                if (!pair_path.empty()) {
                    auto p = rhomix::io::read_pair(rhomix::io::load_json(pair_path));
                    if (cfg.dry_run) return emit_dry(cfg, "mixing");
                    auto m = rhomix::mixing_coefficients(p);
                    json out = {{"alpha", m.alpha},
                                {"beta", m.beta},
                                {"mutual_information", m.mutual_information},
                                {"rho", rhomix::maxcorr_pair(p).rho},
                                {"density_bound", rhomix::density_bound(p)}};
                    const Index N = p.joint.rows(), M = p.joint.cols();
                    if (N <= rhomix::max_event_alphabet && M <= rhomix::max_event_alphabet && N + M <= 32)
                        out["event_ratio"] = rhomix::event_extremes(p).max_ratio;
                    emit(cfg, out);
                    return;
                }
                auto j = rhomix::io::load_json(markov_path);
                Matrix P = rhomix::io::parse_matrix(j.at("P"), "P");
                std::string layout = j.value("layout", std::string("columns"));
                require(layout == "columns" || layout == "rows", ErrorKind::invalid_input, "layout must be columns or rows");
                if (cfg.dry_run) return emit_dry(cfg, "mixing");
                auto r = rhomix::markov_chain_checks(
                    P, steps, layout == "rows" ? rhomix::StochasticLayout::rows : rhomix::StochasticLayout::columns);
                emit(cfg, {{"stationary", rhomix::io::to_json(r.stationary)},
                           {"rho", r.rho},
                           {"product_bound", r.product_bound},
                           {"reversible", r.reversible},
                           {"power_law_residual", r.power_law_residual}});
            };
        });
    }

    // ---- tensor-bound
    std::vector<double> eps_list;
    std::string eps_rows;
    double distance = 1.0;
    {
        auto* s = app.add_subcommand("tensor-bound", "Tensorisation bounds from pairwise subjective correlations");
        add_common(s, cfg);
        s->require_subcommand(1);
        auto* simple = s->add_subcommand("simple", "N against 1: sqrt(1 - prod(1 - eps_i^2))");
        simple->add_option("--eps", eps_list, "Comma-separated epsilons")->delimiter(',')->required();
        auto* nm = s->add_subcommand("nm", "N against M: operator norm of the epsilon matrix");
        nm->add_option("--rows", eps_rows, "Matrix as 'a,b;c,d'")->required();
        auto* zz = s->add_subcommand("zz", "Z against Z: sin(sum arcsin eps(z))");
        zz->add_option("--eps", eps_list, "Offset profile eps(z)")->delimiter(',')->required();
        auto* zn = s->add_subcommand("zn", "Z^n against Z^n from a lattice kernel");
        zn->add_option("--kernel", kernel_path, "LatticeKernel JSON")->check(CLI::ExistingFile)->required();
        auto* dist = s->add_subcommand("distance", "Blocks at distance >= d");
        dist->add_option("--kernel", kernel_path, "LatticeKernel JSON")->check(CLI::ExistingFile)->required();
        dist->add_option("--d", distance, "Distance")->required();
        auto* sub = s->add_subcommand("sublattice", "Uniform bound for disjoint blocks via a sublattice spacing");
        sub->add_option("--kernel", kernel_path, "LatticeKernel JSON")->check(CLI::ExistingFile)->required();
        for (auto* c : {simple, nm, zz, zn, dist, sub}) add_common(c, cfg);
        s->callback([&, s, simple, nm, zz, zn, dist] {
            run = [&, s, simple, nm, zz, zn, dist] {
                std::string kind = s->get_subcommands().front()->get_name();
                if (simple->parsed() || zz->parsed()) {
                    for (double e : eps_list) rhomix::validate_eps(e);
                    if (cfg.dry_run) return emit_dry(cfg, "tensor-bound " + kind);
                    double b = simple->parsed() ? rhomix::simple_bound(eps_list) : rhomix::zz_bound(eps_list);
                    emit(cfg, {{"kind", kind}, {"bound", b}});
                    return;
                }
                if (nm->parsed()) {
                    Matrix e = parse_rows(eps_rows);
                    rhomix::validate_eps_matrix(e);
                    if (cfg.dry_run) return emit_dry(cfg, "tensor-bound nm");
                    emit(cfg, {{"kind", kind}, {"norm", rhomix::nm_norm(e)}, {"bound", rhomix::nm_bound(e)}});
                    return;
                }
                auto k = rhomix::io::read_lattice_kernel(rhomix::io::load_json(kernel_path));
                if (cfg.dry_run) return emit_dry(cfg, "tensor-bound " + kind);
                if (zn->parsed() || dist->parsed()) {
                    auto b = zn->parsed() ? rhomix::zn_bound(k) : rhomix::distance_bound(k, distance);
                    emit(cfg, {{"kind", kind}, {"bound", b.value}, {"tail_error", b.tail_error}, {"R2", b.R2}});
                    return;
                }
                auto r = rhomix::sublattice_k(k);
                emit(cfg, {{"kind", kind}, {"k", r.k}, {"ell", r.ell}, {"class_sums", r.class_sums}});
            };
        });
    }

    // ---- event-bound
    double eps_value = 0.5, x_value = 0.02;
    int grid = 512;
    {
        auto* s = app.add_subcommand("event-bound", "Event criteria: Lambda, extremal events, the nu construction");
        add_common(s, cfg);
        s->require_subcommand(1);
        auto* lam = s->add_subcommand("lambda", "Lambda(eps) = eps (1 + |ln eps|)");
        lam->add_option("--eps", eps_value, "Event-level epsilon in [0,1]")->required();
        auto* ext = s->add_subcommand("extremes", "Largest normalised event covariance of a pair");
        ext->add_option("--pair", pair_path, "Pair JSON")->check(CLI::ExistingFile)->required();
        auto* nu = s->add_subcommand("nu", "Grid search of the event ratio under the nu construction");
        nu->add_option("--eps", eps_value, "Epsilon in (0,1)");
        nu->add_option("--x", x_value, "Split point in (0,1)");
        nu->add_option("--m", grid, "Grid cells");
        for (auto* c : {lam, ext, nu}) add_common(c, cfg);
        s->callback([&, lam, ext] {
            run = [&, lam, ext] {
                if (lam->parsed()) {
                    require(eps_value >= 0.0 && eps_value <= 1.0, ErrorKind::invalid_input, "eps must lie in [0,1]");
                    if (cfg.dry_run) return emit_dry(cfg, "event-bound lambda");
                    emit(cfg, {{"eps", eps_value}, {"lambda", rhomix::lambda_fn(eps_value)}});
                    return;
                }
                if (ext->parsed()) {
                    auto p = rhomix::io::read_pair(rhomix::io::load_json(pair_path));
                    require(p.joint.rows() <= rhomix::max_event_alphabet && p.joint.cols() <= rhomix::max_event_alphabet &&
                                p.joint.rows() + p.joint.cols() <= 32,
                            ErrorKind::size_cap, "event scan needs alphabets of at most 20 states and |X| + |Y| <= 32");
                    if (cfg.dry_run) return emit_dry(cfg, "event-bound extremes");
                    auto e = rhomix::event_extremes(p);
                    double rho = rhomix::maxcorr_pair(p).rho;
                    std::vector<int> A, B;
                    for (std::size_t i = 0; i < e.event_a.size(); ++i)
                        if (e.event_a[i]) A.push_back(int(i));
                    for (std::size_t i = 0; i < e.event_b.size(); ++i)
                        if (e.event_b[i]) B.push_back(int(i));
                    emit(cfg, {{"event_ratio", e.max_ratio},
                               {"event_a", A},
                               {"event_b", B},
                               {"rho", rho},
                               {"lambda_of_ratio", rhomix::lambda_fn(std::min(1.0, e.max_ratio))}});
                    return;
                }
                rhomix::NuModel model(eps_value, x_value, grid);
                require(model.factor() < 1.0, ErrorKind::factor_too_large, "factor must be < 1");
                if (cfg.dry_run) return emit_dry(cfg, "event-bound nu");
                auto r = rhomix::nu_event_ratio(model);
                auto intervals = [](const rhomix::IntervalUnion& u) {
                    json a = json::array();
                    for (const auto& iv : u) a.push_back({iv.lo, iv.hi});
                    return a;
                };
                emit(cfg, {{"worst_ratio", r.worst_ratio},
                           {"factor", r.factor},
                           {"grid_allowance", 2.0 / grid},
                           {"event_a", intervals(r.event_a)},
                           {"event_b", intervals(r.event_b)},
                           {"correlation_witness", r.correlation_witness}});
            };
        });
    }

    // ---- chogosov
    std::size_t sample_n = 10000;
    {
        auto* s = app.add_subcommand("chogosov", "The extremal bivariate law: samples, operator norm, identities");
        add_common(s, cfg);
        s->require_subcommand(1);
        auto* smp = s->add_subcommand("sample", "Inverse-transform samples (p, q, branch)");
        smp->add_option("--eps", eps_value, "Epsilon in (0,1)");
        smp->add_option("--n", sample_n, "Number of points")->check(CLI::PositiveNumber);
        auto* op = s->add_subcommand("opnorm", "Transfer operator norm on an m-cell grid");
        op->add_option("--eps", eps_value, "Epsilon in (0,1)");
        op->add_option("--m", grid, "Grid cells (>= 256)");
        auto* idn = s->add_subcommand("identity", "Integral identities at p = 0.1, 0.5, 0.9");
        idn->add_option("--eps", eps_value, "Epsilon in (0,1)");
        for (auto* c : {smp, op, idn}) add_common(c, cfg);
        s->callback([&, smp, op] {
            run = [&, smp, op] {
                rhomix::ChogosovModel model(eps_value);
                if (smp->parsed()) {
                    if (cfg.dry_run) return emit_dry(cfg, "chogosov sample");
                    auto pts = rhomix::chogosov_sample(model, sample_n, cfg.seed);
                    if (cfg.format == "csv") {
                        rhomix::io::Sink sink(cfg.output);
                        rhomix::io::CsvWriter w(sink.out(), "chogosov sample cloud, eps=" + rhomix::io::number(eps_value),
                                                {"p", "q", "branch"});
                        for (const auto& pt : pts) w.row(pt.p, pt.q, branch_name(pt.branch));
                        return;
                    }
                    std::vector<double> ps, qs;
                    for (const auto& pt : pts) {
                        ps.push_back(pt.p);
                        qs.push_back(pt.q);
                    }
                    emit(cfg, {{"n", sample_n}, {"ks_p", rhomix::ks_uniform(ps)}, {"ks_q", rhomix::ks_uniform(qs)}});
                    return;
                }
                if (op->parsed()) {
                    require(grid >= 256, ErrorKind::grid_too_coarse, "grid needs m >= 256 cells");
                    if (cfg.dry_run) return emit_dry(cfg, "chogosov opnorm");
                    auto r = rhomix::chogosov_opnorm(model, grid);
                    emit(cfg, {{"rho_hat", r.rho_hat},
                               {"rayleigh", r.rayleigh},
                               {"lambda", r.lambda},
                               {"m", r.m},
                               {"krylov_steps", r.krylov_steps}});
                    return;
                }
                if (cfg.dry_run) return emit_dry(cfg, "chogosov identity");
                json rows = json::array();
                for (double p : {0.1, 0.5, 0.9}) {
                    auto r = rhomix::lambda_integral_identity(model, p);
                    rows.push_back({{"p", p}, {"atom_D", r.atom_D}, {"atom_U", r.atom_U}, {"interior", r.interior},
                                    {"total", r.total}});
                }
                emit(cfg, {{"lambda", rhomix::lambda_fn(eps_value)},
                           {"integral_identity", rows},
                           {"lstar_residual", rhomix::lstar_identity(model, {0.1, 0.25, 0.5, 0.75, 0.9})}});
            };
        });
    }

    // ---- glauber-gap / glauber-sim
    int spins = 0;
    double coupling = 0.0, horizon = std::numeric_limits<double>::infinity(), dt = 0.1;
    std::size_t events = 1000000;
    {
        auto* s = app.add_subcommand("glauber-gap", "Spectral gap lower bounds for heat-bath dynamics");
        add_common(s, cfg);
        auto* src = s->add_option_group("source");
        src->add_option("--system", system_path, "System JSON")->check(CLI::ExistingFile);
        src->add_option("--spins", spins, "Fully connected +-1 spin cluster size");
        src->add_option("--rows", eps_rows, "Epsilon matrix as 'a,b;c,d'");
        src->add_option("--kernel", kernel_path, "LatticeKernel JSON (infinite lattice)")->check(CLI::ExistingFile);
        src->require_option(1);
        s->add_option("--coupling", coupling, "Spin coupling J");
        s->callback([&] {
            run = [&] {
                if (!kernel_path.empty()) {
                    auto k = rhomix::io::read_lattice_kernel(rhomix::io::load_json(kernel_path));
                    if (cfg.dry_run) return emit_dry(cfg, "glauber-gap");
                    auto r = rhomix::sublattice_gap(k);
                    emit(cfg, {{"gap_lower_bound", r.value}, {"zeta", r.zeta}, {"k", r.k}, {"ell", r.ell},
                               {"bound_M", r.bound_M}});
                    return;
                }
                std::optional<rhomix::FiniteSystem> sys;
                Matrix eps;
                if (!eps_rows.empty()) {
                    eps = parse_rows(eps_rows);
                } else {
                    sys = !system_path.empty() ? rhomix::io::read_system(rhomix::io::load_json(system_path))
                                               : spin_cluster(spins, coupling);
                    require(sys->num_states() <= rhomix::max_gap_states, ErrorKind::size_cap,
                            "exact gap limited to 4096 states");
                }
                if (cfg.dry_run) return emit_dry(cfg, "glauber-gap");
                if (sys) eps = rhomix::measured_epsilon(*sys);
                auto b = rhomix::gap_lower_bounds(eps);
                json out = {{"epsilon", rhomix::io::to_json(eps)},
                            {"bound_M", b.bound_M},
                            {"bound_simple", b.bound_simple},
                            {"M", rhomix::io::to_json(b.M)}};
                if (b.mprime_defined) out["bound_Mprime"] = b.bound_Mprime;
                if (sys) out["exact_gap"] = rhomix::exact_gap(*sys);
                emit(cfg, out);
            };
        });
    }
    {
        auto* s = app.add_subcommand("glauber-sim", "Continuous-time heat-bath simulation");
        add_common(s, cfg);
        auto* src = s->add_option_group("source");
        src->add_option("--system", system_path, "System JSON")->check(CLI::ExistingFile);
        src->add_option("--spins", spins, "Fully connected +-1 spin cluster size");
        src->require_option(1);
        s->add_option("--coupling", coupling, "Spin coupling J");
        s->add_option("--events", events, "Maximum number of events")->check(CLI::PositiveNumber);
        s->add_option("--horizon", horizon, "Simulated time horizon")->check(CLI::PositiveNumber);
        s->add_option("--dt", dt, "Sampling step of the observable")->check(CLI::PositiveNumber);
        s->callback([&] {
            run = [&] {
                rhomix::FiniteSystem sys = !system_path.empty() ? rhomix::io::read_system(rhomix::io::load_json(system_path))
                                                                : spin_cluster(spins, coupling);
                require(sys.num_states() <= rhomix::max_gap_states, ErrorKind::size_cap, "exact gap limited to 4096 states");
                if (cfg.dry_run) return emit_dry(cfg, "glauber-sim");
                auto eg = rhomix::exact_gap_detail(sys);
                rhomix::FiniteGlauberModel model(sys);
                rhomix::SimulationConfig sc;
                sc.max_events = events;
                sc.horizon = horizon;
                sc.dt = dt;
                sc.record = cfg.format == "csv";
                auto rep = rhomix::glauber_simulate(
                    model, [&](const std::vector<int>& st) { return model.observe_state(st, eg.eigenfunction); }, sc,
                    cfg.seed);
                if (cfg.format == "csv") {
                    rhomix::io::Sink sink(cfg.output);
                    rhomix::io::CsvWriter w(sink.out(),
                                            "heat-bath trajectory, seed=" + std::to_string(cfg.seed) +
                                                ", exact gap=" + rhomix::io::number(eg.gap),
                                            {"time", "site", "new_state"});
                    for (const auto& e : rep.trajectory) w.row(e.time, e.site, e.new_state);
                    return;
                }
                emit(cfg, {{"events", rep.events},
                           {"time", rep.time},
                           {"fitted_rate", rep.fitted_rate},
                           {"exact_gap", eg.gap},
                           {"relaxation_time", rep.relaxation_time}});
            };
        });
    }

    // ---- ising
    int dim = 1, side = 4, burn_in = 2000, samples = 20000, thin = 2;
    double temperature = 3.0;
    std::string method = "exact";
    bool snapshot = false;
    {
        auto* s = app.add_subcommand("ising", "Correlation kernel of a periodic Ising model");
        add_common(s, cfg);
        s->add_option("--n", dim, "Lattice dimension")->check(CLI::Range(1, 3));
        s->add_option("--L", side, "Torus side")->check(CLI::Range(2, 4096));
        s->add_option("--T", temperature, "Temperature")->check(CLI::PositiveNumber);
        s->add_option("--method", method, "exact or mcmc")->check(CLI::IsMember({"exact", "mcmc"}));
        s->add_option("--burn-in", burn_in, "MCMC burn-in sweeps")->check(CLI::NonNegativeNumber);
        s->add_option("--samples", samples, "MCMC samples")->check(CLI::PositiveNumber);
        s->add_option("--thin", thin, "Sweeps between samples")->check(CLI::PositiveNumber);
        s->add_flag("--snapshot", snapshot, "Print one sampled configuration as a text grid");
        s->callback([&] {
            run = [&] {
                rhomix::IsingTorus t;
                t.n = dim;
                t.L = side;
                t.T = temperature;
                rhomix::validate(t);
                if (cfg.dry_run) return emit_dry(cfg, "ising");
                if (snapshot) {
                    require(dim <= 2, ErrorKind::invalid_input, "snapshots need n <= 2");
                    rhomix::IsingGlauberModel model(t);
                    std::mt19937_64 rng(cfg.seed);
                    auto st = model.initial(rng);
                    for (int k = 0; k < burn_in; ++k) model.sweep(st, rng);
                    rhomix::io::Sink sink(cfg.output);
                    auto& os = sink.out();
                    const int rows = dim == 1 ? 1 : side;
                    os << "P1\n# ising snapshot T=" << rhomix::io::number(temperature) << " seed=" << cfg.seed << "\n"
                       << side << " " << rows << "\n";
                    for (int r = 0; r < rows; ++r) {
                        for (int c = 0; c < side; ++c) os << (c ? " " : "") << st[std::size_t(r * side + c)];
                        os << "\n";
                    }
                    return;
                }
                rhomix::McmcBudget budget{std::size_t(burn_in), std::size_t(samples), std::size_t(thin)};
                auto r = rhomix::ising_epsilon(
                    t, method == "exact" ? rhomix::EpsilonMethod::exact : rhomix::EpsilonMethod::mcmc, cfg.seed, budget);
                json out = {{"c0", r.c0},
                            {"k0", r.k0},
                            {"subjective", r.subjective},
                            {"samples", r.samples},
                            {"epsilon", rhomix::io::to_json(r.kernel)}};
                if (method == "mcmc") {
                    out["ci_low"] = rhomix::io::to_json(r.ci_low);
                    out["ci_high"] = rhomix::io::to_json(r.ci_high);
                }
                emit(cfg, out);
            };
        });
    }

    // ---- quadratic
    double beta = 1.0;
    {
        auto* s = app.add_subcommand("quadratic", "Quadratic lattice model: covariance and correlation bounds");
        add_common(s, cfg);
        auto* src = s->add_option_group("source");
        src->add_option("--kernel", kernel_path, "Coupling kernel JSON (Toeplitz shape)")->check(CLI::ExistingFile);
        src->add_option("--coupling", coupling, "Nearest-neighbour coupling g");
        src->require_option(1);
        s->add_option("--n", dim, "Dimension for --coupling")->check(CLI::Range(1, 3));
        s->add_option("--beta", beta, "Inverse temperature")->check(CLI::PositiveNumber);
        s->callback([&] {
            run = [&] {
                rhomix::QuadraticModel m;
                if (!kernel_path.empty())
                    m.gamma = rhomix::io::read_toeplitz(rhomix::io::load_json(kernel_path));
                else
                    m = rhomix::nearest_neighbour_quadratic(dim, coupling);
                m.beta = beta;
                rhomix::validate(m);
                if (cfg.dry_run) return emit_dry(cfg, "quadratic");
                auto cov = rhomix::quadratic_covariance(m);
                auto r = rhomix::quadratic_rho_report(m);
                json bounds = json::array();
                for (auto [d, b] : r.distance_bounds) bounds.push_back({{"d", d}, {"bound", b}});
                json out = {{"Gamma", r.Gamma},
                            {"covariance_sum", cov.total},
                            {"truncation_l1", cov.truncation_l1},
                            {"eps_sum", r.eps_sum},
                            {"gamma_bound_applies", r.gamma_bound_applies},
                            {"distance_bounds", bounds},
                            {"sublattice_k", r.sublattice.k},
                            {"sublattice_ell", r.sublattice.ell}};
                if (cov.a_inv.R >= 11) {
                    auto f = rhomix::decay_fit(rhomix::shell_profile(cov.a_inv));
                    out["decay"] = {{"class", rhomix::decay_name(f.cls)}, {"rate", f.rate}, {"exponent", f.exponent}};
                }
                emit(cfg, out);
            };
        });
    }

    // ---- conv-inverse
    double tol = 1e-12;
    std::vector<double> banded;
    {
        auto* s = app.add_subcommand("conv-inverse", "Convolution inverse B[a] and decay classification");
        add_common(s, cfg);
        auto* src = s->add_option_group("source");
        src->add_option("--kernel", kernel_path, "Kernel JSON (Toeplitz shape)")->check(CLI::ExistingFile);
        src->add_option("--banded", banded, "r,R,A,gamma: constants for banded matrix inverses")->delimiter(',')->expected(4);
        src->require_option(1);
        s->add_option("--tol", tol, "Series truncation tolerance")->check(CLI::PositiveNumber);
        s->callback([&] {
            run = [&] {
                if (!banded.empty()) {
                    require(banded.size() == 4, ErrorKind::invalid_input, "--banded needs r,R,A,gamma");
                    if (cfg.dry_run) {
                        rhomix::banded_inverse_constants(banded[0], banded[1], banded[2], banded[3]);
                        return emit_dry(cfg, "conv-inverse");
                    }
                    auto b = rhomix::banded_inverse_constants(banded[0], banded[1], banded[2], banded[3]);
                    emit(cfg, {{"A_prime", b.A_prime}, {"gamma_prime", b.gamma_prime}, {"A1", b.A1}, {"gamma1", b.gamma1}});
                    return;
                }
                auto a = rhomix::io::read_toeplitz(rhomix::io::load_json(kernel_path));
                require(a.l1() + a.tail_l1 < 1.0, ErrorKind::invalid_input, "convolution inverse needs ||a||_1 < 1");
                if (cfg.dry_run) return emit_dry(cfg, "conv-inverse");
                auto B = rhomix::conv_inverse(a, tol);
                if (cfg.format == "csv") {
                    rhomix::io::Sink sink(cfg.output);
                    std::vector<std::string> cols;
                    for (int c = 0; c < a.n; ++c) cols.push_back("z" + std::to_string(c + 1));
                    cols.push_back("b");
                    rhomix::io::CsvWriter w(sink.out(), "convolution inverse B[a] on its window", cols);
                    for (std::size_t i = 0; i < B.b.values.size(); ++i) {
                        auto z = B.b.point(i);
                        std::string key;
                        for (std::size_t c = 0; c < z.size(); ++c) key += (c ? "," : "") + std::to_string(z[c]);
                        w.row(key, B.b.values[i]);
                    }
                    return;
                }
                json out = {{"terms", B.terms},
                            {"window_R", B.b.R},
                            {"truncation_l1", B.truncation_l1},
                            {"identity_residual", B.identity_residual},
                            {"l1", B.b.l1()}};
                if (B.b.R >= 11) {
                    auto f = rhomix::decay_fit(rhomix::shell_profile(B.b));
                    out["decay"] = {{"class", rhomix::decay_name(f.cls)}, {"rate", f.rate}, {"exponent", f.exponent},
                                    {"used_shells", f.used_shells}};
                }
                emit(cfg, out);
            };
        });
    }

    // ---- clt
    std::string model_name = "ising", shape = "cube";
    std::vector<int> ells = {8, 16, 32};
    std::size_t replicas = 10000;
    {
        auto* s = app.add_subcommand("clt", "Block-sum central limit experiment");
        add_common(s, cfg);
        s->add_option("--model", model_name, "ising or quadratic")->check(CLI::IsMember({"ising", "quadratic"}));
        s->add_option("--n", dim, "Dimension")->check(CLI::Range(1, 3));
        s->add_option("--L", side, "Torus side (Ising)");
        s->add_option("--T", temperature, "Temperature (Ising)")->check(CLI::PositiveNumber);
        s->add_option("--coupling", coupling, "Nearest-neighbour coupling (quadratic)");
        s->add_option("--ells", ells, "Block sides")->delimiter(',');
        s->add_option("--replicas", replicas, "Independent replicas")->check(CLI::PositiveNumber);
        s->add_option("--shape", shape, "cube or disk")->check(CLI::IsMember({"cube", "disk"}));
        s->add_option("--burn-in", burn_in, "Heat-bath sweeps per replica (n >= 2)")->check(CLI::NonNegativeNumber);
        s->callback([&] {
            run = [&] {
                rhomix::CLTReport rep;
                if (model_name == "ising") {
                    rhomix::IsingTorus t;
                    t.n = dim;
                    t.L = side;
                    t.T = temperature;
                    rhomix::validate(t);
                    for (int l : ells) require(l >= 1 && l <= side, ErrorKind::invalid_input, "block side must be in 1..L");
                    if (cfg.dry_run) return emit_dry(cfg, "clt");
                    rep = rhomix::clt_experiment(t, [](int w) { return double(w); }, ells, replicas, cfg.seed,
                                                 shape == "disk" ? rhomix::BlockShape::disk : rhomix::BlockShape::cube,
                                                 {std::size_t(burn_in), 0, 5});
                } else {
                    auto m = rhomix::nearest_neighbour_quadratic(dim, coupling);
                    rhomix::validate(m);
                    if (cfg.dry_run) return emit_dry(cfg, "clt");
                    rep = rhomix::clt_experiment(m, ells, replicas, cfg.seed);
                }
                if (cfg.format == "csv") {
                    rhomix::io::Sink sink(cfg.output);
                    rhomix::io::CsvWriter w(sink.out(), "block-sum CLT, " + model_name + " model",
                                            {"ell", "sigma_hat2", "cf_distance", "sigma_block2"});
                    for (const auto& r : rep.rows) w.row(r.ell, r.sigma_hat2, r.cf_distance, r.sigma_block2);
                    return;
                }
                json rows = json::array();
                for (const auto& r : rep.rows)
                    rows.push_back({{"ell", r.ell},
                                    {"block_sites", r.block_sites},
                                    {"sigma_hat2", r.sigma_hat2},
                                    {"sigma_block2", r.sigma_block2},
                                    {"cf_distance", r.cf_distance}});
                emit(cfg, {{"rows", rows}, {"sigma2_limit", rep.sigma2_limit}});
            };
        });
    }

    // ---- ou-chain
    rhomix::OUChainParams ou;
    std::string params_path;
    bool small_time = false;
    {
        auto* s = app.add_subcommand("ou-chain", "Kinetic particle chain: correlation between now and time t");
        add_common(s, cfg);
        s->add_option("--params", params_path, "Flat JSON of parameters")->check(CLI::ExistingFile);
        s->add_option("--K", ou.K, "Number of particles");
        s->add_option("--t", ou.t, "Time lag");
        s->add_option("--m", ou.m, "Mass");
        s->add_option("--omega", ou.omega, "Pinning frequency");
        s->add_option("--c", ou.c, "Coupling");
        s->add_option("--T", ou.T, "Temperature");
        s->add_option("--lambda", ou.lambda, "Friction");
        s->add_flag("--small-time", small_time, "Report leading small-time coefficients");
        s->callback([&] {
            run = [&] {
                if (!params_path.empty()) {
                    auto j = rhomix::io::load_json(params_path);
                    for (const auto& [k, v] : j.items()) {
                        double x = rhomix::io::parse_number(v);
                        if (k == "K")
                            ou.K = int(x);
                        else if (k == "t")
                            ou.t = x;
                        else if (k == "m")
                            ou.m = x;
                        else if (k == "omega")
                            ou.omega = x;
                        else if (k == "c")
                            ou.c = x;
                        else if (k == "T")
                            ou.T = x;
                        else if (k == "lambda")
                            ou.lambda = x;
                        else
                            throw rhomix::Error(ErrorKind::invalid_input, "unknown parameter '" + k + "'");
                    }
                }
                rhomix::validate(ou);
                if (cfg.dry_run) return emit_dry(cfg, "ou-chain");
                auto r = rhomix::ou_chain_joint(ou);
                json out = {{"maxcorr", r.maxcorr},
                            {"one_minus_maxcorr", 1.0 - r.maxcorr},
                            {"lyapunov_residual", r.lyapunov_residual},
                            {"consistency_residual", r.consistency_residual},
                            {"precision_min", r.precision_min},
                            {"precision_max", r.precision_max}};
                if (small_time) {
                    auto st = rhomix::ou_small_time(ou);
                    out["small_time"] = {{"c_pp", st.c_pp},           {"c_pq", st.c_pq},
                                         {"c_qq", st.c_qq},           {"expected_pp", st.expected_pp},
                                         {"expected_pq", st.expected_pq}, {"expected_qq", st.expected_qq},
                                         {"pp_slopes", st.pp_slopes}};
                }
                emit(cfg, out);
            };
        });
    }

    // ---- three-lines
    std::vector<double> u1, u2, u3, angles;
    {
        auto* s = app.add_subcommand("three-lines", "True and apparent angles of three lines through the origin");
        add_common(s, cfg);
        s->add_option("--u1", u1, "Direction x,y,z")->delimiter(',')->expected(3);
        s->add_option("--u2", u2, "Direction x,y,z")->delimiter(',')->expected(3);
        s->add_option("--u3", u3, "Direction x,y,z")->delimiter(',')->expected(3);
        s->add_option("--angles", angles, "A,B,Omega in radians")->delimiter(',')->expected(3);
        s->callback([&] {
            run = [&] {
                std::array<Eigen::Vector3d, 3> u;
                if (!angles.empty()) {
                    require(angles.size() == 3, ErrorKind::invalid_input, "--angles needs A,B,Omega");
                    u = rhomix::lines_from_angles(angles[0], angles[1], angles[2]);
                } else {
                    require(u1.size() == 3 && u2.size() == 3 && u3.size() == 3, ErrorKind::invalid_input,
                            "give --u1, --u2, --u3 or --angles");
                    u = {Eigen::Vector3d(u1[0], u1[1], u1[2]), Eigen::Vector3d(u2[0], u2[1], u2[2]),
                         Eigen::Vector3d(u3[0], u3[1], u3[2])};
                }
                if (cfg.dry_run) {
                    rhomix::three_lines(u[0], u[1], u[2]);
                    return emit_dry(cfg, "three-lines");
                }
                auto r = rhomix::three_lines(u[0], u[1], u[2]);
                emit(cfg, {{"angles", {r.A, r.B, r.Omega}},
                           {"apparent", {r.A_app, r.B_app, r.Omega_app}},
                           {"sine_ratios", {r.sine_ratios[0], r.sine_ratios[1], r.sine_ratios[2]}},
                           {"order_consistent", r.order_consistent}});
            };
        });
    }

    // ---- verify-all
    int verify_status = 0;
    {
        auto* s = app.add_subcommand("verify-all", "Run the acceptance suite and print a pass/fail table");
        add_common(s, cfg);
        s->callback([&] {
            run = [&] {
                if (cfg.dry_run) return emit_dry(cfg, "verify-all");
                rhomix::io::Sink sink(cfg.output);
                auto& os = sink.out();
                auto results = rhomix::verify::run_all(cfg.seed, [&](const rhomix::verify::Result& r) {
                    os << rhomix::verify::result_line(r) << std::endl;
                });
                int passed = 0;
                for (const auto& r : results) passed += r.passed;
                os << passed << "/" << results.size() << " criteria passed\n";
                verify_status = passed == int(results.size()) ? 0 : 1;
            };
        });
    }

    try {
        app.parse(argc, argv);
        resolve_threads(cfg.threads);
        require(bool(run), ErrorKind::invalid_input, "no command given");
        run();
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_validation;
    } catch (const rhomix::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return verify_status;
}
