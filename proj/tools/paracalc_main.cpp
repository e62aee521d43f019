#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "paracalc/correctors.hpp"
#include "paracalc/errors.hpp"
#include "paracalc/littlewood_paley.hpp"
#include "paracalc/parallel.hpp"
#include "paracalc/qpam_solver.hpp"
#include "paracalc/reference_data.hpp"
#include "paracalc/synthetic.hpp"
#include "paracalc/word_algebra.hpp"

using namespace paracalc;
using nlohmann::json;

namespace {

std::string read_text(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    require(bool(f), ErrorKind::io, "cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

/// Writes to path, or to stdout when path is empty.
void emit(const std::string& path, const std::string& text)
{
    if (path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(path, std::ios::binary);
    require(bool(f), ErrorKind::io, "cannot write " + path);
    f << text;
    if (!text.empty() && text.back() != '\n') f << '\n';
    require(bool(f), ErrorKind::io, "failed writing " + path);
}

std::pair<int, int> parse_window(const std::string& s)
{
    const auto colon = s.find(':');
    require(colon != std::string::npos, ErrorKind::configuration, "window must look like j0:j1");
    try {
        return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
    } catch (const std::exception&) {
        fail(ErrorKind::configuration, "window must look like j0:j1");
    }
}

std::vector<double> parse_list(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            fail(ErrorKind::configuration, "not a number: '" + item + "'");
        }
    }
    require(!out.empty(), ErrorKind::configuration, "empty exponent list");
    return out;
}

/// PARACALC_SEED, when set, replaces the seed given on the command line or in the config.
std::uint64_t seed_override(std::uint64_t seed)
{
    if (const char* env = std::getenv("PARACALC_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            fail(ErrorKind::configuration, "PARACALC_SEED is not an unsigned integer");
        }
    }
    return seed;
}

Field pick_slice(const PcfContents& c, int slice)
{
    const int count = int(c.slices.size());
    const int m = slice < 0 ? count + slice : slice;
    require(m >= 0 && m < count, ErrorKind::configuration, "slice index out of range");
    return c.slices[std::size_t(m)];
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"paracalc: paraproducts, paracontrolled systems and a quasilinear gPAM solver on the torus"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "cap on worker threads (default: hardware)")->check(CLI::NonNegativeNumber);

    // decompose
    std::string in_path, out_path;
    int slice = -1;
    auto* decompose_cmd = app.add_subcommand("decompose", "dyadic blocks and their sup norms as CSV");
    decompose_cmd->add_option("--in", in_path, "input field (.pcf)")->required();
    decompose_cmd->add_option("--report", out_path, "CSV output (default stdout)");
    decompose_cmd->add_option("--slice", slice, "time slice, negative counts from the end");

    // estimate
    std::string window;
    auto* estimate_cmd = app.add_subcommand("estimate", "regularity estimate by dyadic regression");
    estimate_cmd->add_option("--in", in_path, "input field (.pcf)")->required();
    estimate_cmd->add_option("--alpha-window", window, "block window j0:j1 (default 1:J-2)");
    estimate_cmd->add_option("--slice", slice, "time slice, negative counts from the end");
    estimate_cmd->add_option("--out", out_path, "CSV output (default stdout)");

    // synth
    double synth_alpha = 0.5;
    int synth_n = 4096;
    std::uint64_t seed = 1;
    auto* synth_cmd = app.add_subcommand("synth", "lacunary field of a prescribed exponent");
    synth_cmd->add_option("--alpha", synth_alpha, "target exponent");
    synth_cmd->add_option("--n", synth_n, "grid size (1d)");
    synth_cmd->add_option("--seed", seed, "seed");
    synth_cmd->add_option("--out", out_path, "output field (.pcf)")->required();

    // test-operator
    std::string op_id, exponents;
    int trials = 5, harness_n = 8192;
    auto* op_cmd = app.add_subcommand("test-operator", "regularity-gain report for one operator");
    op_cmd->add_option("--op", op_id, "operator id")->required();
    op_cmd->add_option("--exponents", exponents, "input exponents, comma separated")->required();
    op_cmd->add_option("--trials", trials, "seeded trials")->check(CLI::PositiveNumber);
    op_cmd->add_option("--seed", seed, "first seed");
    op_cmd->add_option("--n", harness_n, "grid size (1d)");
    op_cmd->add_option("--out", out_path, "JSON report (default stdout)");
    bool list_ops = false;
    op_cmd->add_flag("--list", list_ops, "print the operator catalogue and exit");

    // alphabet
    double alpha = 0.45;
    int order = 3, chain_cap = 0, vector_fields = 1;
    auto* alphabet_cmd = app.add_subcommand("alphabet", "letters, words and exponents as JSON");
    alphabet_cmd->add_option("--alpha", alpha, "regularity exponent in (2/5, 1/2)");
    alphabet_cmd->add_option("--order", order, "order n of the truncation");
    alphabet_cmd->add_option("--chain-cap", chain_cap, "maximal chain count K");
    alphabet_cmd->add_option("--vector-fields", vector_fields, "number of vector fields (the dimension)");
    alphabet_cmd->add_option("--out", out_path, "JSON output (default stdout)");

    // build-refs
    std::string alphabet_path;
    NoiseSpec noise;
    int refs_n = 64, refs_steps = 40;
    double refs_T = 0.05, refs_c0 = 1.0;
    auto* refs_cmd = app.add_subcommand("build-refs", "reference letters and stochastic terms to a store");
    refs_cmd->add_option("--alphabet", alphabet_path, "alphabet JSON from the alphabet command")->required();
    refs_cmd->add_option("--seed", noise.seed, "noise seed");
    refs_cmd->add_option("--mol", noise.mol, "mollifier scale");
    refs_cmd->add_option("--amplitude", noise.amplitude, "noise amplitude");
    refs_cmd->add_flag("--time-dependent", noise.time_dependent, "space-time noise");
    refs_cmd->add_option("--n", refs_n, "grid size per axis");
    refs_cmd->add_option("--T", refs_T, "time horizon");
    refs_cmd->add_option("--steps", refs_steps, "time steps");
    refs_cmd->add_option("--c0", refs_c0, "constant of L = c0 (-Laplacian)");
    refs_cmd->add_option("--out", out_path, "store directory")->required();

    // verify-assumption-a
    std::string refs_dir;
    auto* fit_cmd = app.add_subcommand("verify-assumption-a", "geometric envelope of chain-letter norms");
    fit_cmd->add_option("--refs", refs_dir, "store directory")->required();
    fit_cmd->add_option("--out", out_path, "JSON output (default stdout)");

    // solve-qpam
    std::string config_path;
    auto* solve_cmd = app.add_subcommand("solve-qpam", "fixed-point solve, reference solve and comparison");
    solve_cmd->add_option("--config", config_path, "problem JSON")->required();
    solve_cmd->add_option("--out", out_path, "run directory")->required();

    // compare
    std::string a_path, b_path;
    auto* compare_cmd = app.add_subcommand("compare", "per-slice sup and L2 distances of two fields");
    compare_cmd->add_option("--a", a_path, "first field (.pcf)")->required();
    compare_cmd->add_option("--b", b_path, "second field (.pcf)")->required();
    compare_cmd->add_option("--out", out_path, "JSON output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (threads > 0) set_thread_limit(threads);

        if (*decompose_cmd) {
            emit(out_path, decomposition_csv(decompose(pick_slice(read_pcf(in_path), slice))));
        } else if (*estimate_cmd) {
            const Field f = pick_slice(read_pcf(in_path), slice);
            if (window.empty()) {
                emit(out_path, estimate_csv(estimate_regularity(f)));
            } else {
                const auto [j0, j1] = parse_window(window);
                emit(out_path, estimate_csv(estimate_regularity(f, j0, j1)));
            }
        } else if (*synth_cmd) {
            LacunarySpec spec;
            spec.alpha = synth_alpha;
            write_pcf(out_path, lacunary_field(SpaceGrid::make(1, synth_n), spec, seed));
        } else if (*op_cmd) {
            if (list_ops) {
                json j = json::array();
                for (const auto& info : operator_catalogue())
                    j.push_back({{"id", info.id}, {"slots", info.slots}, {"statement", info.statement}});
                emit(out_path, j.dump(2));
            } else {
                HarnessConfig cfg;
                cfg.n = harness_n;
                const auto report = regularity_gain_report(op_id, parse_list(exponents), seed, trials, cfg);
                emit(out_path, report_json(report));
                if (report.verdict == "fail") return 3;
            }
        } else if (*alphabet_cmd) {
            emit(out_path, alphabet_json(make_layout(generate_alphabet(alpha, order, chain_cap, vector_fields), order)));
        } else if (*refs_cmd) {
            json j;
            try {
                j = json::parse(read_text(alphabet_path));
                alpha = j.at("alpha").get<double>();
                order = j.at("order").get<int>();
                chain_cap = j.at("chain_cap").get<int>();
                vector_fields = j.value("vector_fields", 1);
            } catch (const json::exception& e) {
                fail(ErrorKind::configuration, std::string("alphabet file: ") + e.what());
            }
            require(refs_steps >= 1 && refs_T > 0, ErrorKind::configuration, "need --steps >= 1 and --T > 0");
            require(refs_c0 > 0, ErrorKind::configuration, "need --c0 > 0");
            noise.seed = seed_override(noise.seed);
            const auto L = make_layout(generate_alphabet(alpha, order, chain_cap, vector_fields), order);
            const auto refs = build_reference_data(L, noise, SpaceGrid::make(vector_fields, refs_n), refs_steps,
                                                   refs_T / refs_steps, OperatorL::constant(refs_c0));
            write_reference_store(refs, out_path);
        } else if (*fit_cmd) {
            const auto [records, cap] = read_store_norms(refs_dir);
            emit(out_path, assumption_a_json(verify_assumption_a(records, cap)));
        } else if (*solve_cmd) {
            ProblemSpec spec = problem_from_json(read_text(config_path));
            spec.noise.seed = seed_override(spec.noise.seed);
            const RunOutput out = run_problem(spec);
            write_run(out_path, spec, out);
            std::cout << "iterations " << out.solve.diagnostics.iterations << ", max |u - u_ref| "
                      << out.comparison.max_sup << ", band " << out.tolerance_band
                      << (within_band(out) ? " (within)" : " (OUTSIDE)") << '\n';
        } else if (*compare_cmd) {
            const auto a = read_pcf(a_path), b = read_pcf(b_path);
            require(a.grid == b.grid, ErrorKind::configuration, "compare: fields live on different grids");
            require(a.slices.size() == b.slices.size(), ErrorKind::configuration,
                    "compare: fields have different slice counts");
            emit(out_path, compare_json(compare(a.as_space_time(1.0), b.as_space_time(1.0))));
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
