// odt: batch front end for ingestion, factorization, completion experiments,
// yearly sequences, dimensionality sweeps, synthetic cities and reports.
//
// Exit codes: 0 success, 2 input error (including bad flags), 3 solver failure.

#include "cli_support.hpp"

#include <chrono>
#include <deque>
#include <iostream>
#include <set>

namespace odt::cli {
namespace {

// ---- shared solver options ---------------------------------------------------

struct SolverArgs {
    Hyperparameters h;
    bool no_neighbors = false;
    std::uint64_t seed = 1;
    std::size_t starts = 4;

    [[nodiscard]] Hyperparameters hyperparameters() const {
        Hyperparameters out = h;
        out.neighbor_regularization = !no_neighbors;
        out.validate();
        return out;
    }
};

void add_solver_options(CLI::App* sub, SolverArgs& a) {
    sub->add_option("--rank-origin", a.h.ranks.origin, "Origin pattern count I")->capture_default_str();
    sub->add_option("--rank-destination", a.h.ranks.destination, "Destination pattern count J")->capture_default_str();
    sub->add_option("--rank-time", a.h.ranks.time, "Temporal pattern count K")->capture_default_str();
    sub->add_option("--context-origin", a.h.context_origin, "Weight of |W - O O^T|^2")->capture_default_str();
    sub->add_option("--context-destination", a.h.context_destination, "Weight of |W - D D^T|^2")
        ->capture_default_str();
    sub->add_option("--sparsity-origin", a.h.sparsity_origin, "L1 weight on O")->capture_default_str();
    sub->add_option("--sparsity-destination", a.h.sparsity_destination, "L1 weight on D")->capture_default_str();
    sub->add_option("--sparsity-time", a.h.sparsity_time, "L1 weight on T")->capture_default_str();
    sub->add_option("--sparsity-core", a.h.sparsity_core, "L1 weight on the core")->capture_default_str();
    sub->add_option("--max-rounds", a.h.max_rounds, "Round limit per start")->capture_default_str();
    sub->add_option("--tolerance", a.h.tolerance, "Relative objective change that stops a run")
        ->capture_default_str();
    sub->add_flag("--no-neighbors", a.no_neighbors, "Disable the neighbor regularization pass");
    sub->add_option("--nr-sigma", a.h.nr_sigma, "Kernel bandwidth; <= 0 uses the median neighbor distance")
        ->capture_default_str();
    sub->add_option("--seed", a.seed, "Seed for random starts and sampling masks")->capture_default_str();
    sub->add_option("--starts", a.starts, "Random starts per fit; the lowest final objective wins")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
}

const std::set<std::string> kModels{"nr-cntf", "cntf", "tucker", "cp", "rcp"};

struct Fit {
    std::string model;
    std::string kind;  // checkpoint kind
    FactorModel factors;
    std::vector<double> history;
    std::size_t rounds = 0;
    bool converged = false;
    std::size_t nr_accepted = 0;
    std::size_t nr_rejected = 0;
    std::vector<std::size_t> nr_rejected_rounds;
    double seconds = 0.0;
};

Fit fit(const std::string& model, const Dataset& ds, const SolverArgs& a, const SampleMask* mask,
        std::size_t cp_rank) {
    const auto t0 = std::chrono::steady_clock::now();
    Hyperparameters h = a.hyperparameters();
    Fit out;
    out.model = model;
    out.kind = "tucker";
    const auto take = [&](SolveResult res) {
        out.factors = std::move(res.model);
        out.history = std::move(res.objective_history);
        out.rounds = res.rounds;
        out.converged = res.converged;
        out.nr_accepted = res.nr_accepted;
        out.nr_rejected = res.nr_rejected;
        out.nr_rejected_rounds = std::move(res.nr_rejected_rounds);
    };
    SolveOptions opts;
    opts.mask = mask;
    if (model == "nr-cntf" || model == "cntf") {
        if (model == "nr-cntf" && h.neighbor_regularization) {
            if (!ds.graph) throw input_error("nr-cntf needs an adjacency graph in the dataset");
            opts.graph = &*ds.graph;
        } else {
            h.neighbor_regularization = false;
        }
        take(bcd_solve_multistart(ds.r, &ds.context, h, a.seed, a.starts, opts));
    } else if (model == "tucker") {
        take(tucker_solve_multistart(ds.r, h, mask, a.seed, a.starts));
    } else {
        const ContextMatrix* ctx = model == "rcp" ? &ds.context : nullptr;
        auto res = cp_solve_multistart(ds.r, ctx, h, cp_rank, mask, a.seed, a.starts);
        out.kind = "cp";
        out.factors = to_tucker(res.model);
        out.history = std::move(res.objective_history);
        out.rounds = res.rounds;
        out.converged = res.converged;
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

Checkpoint to_checkpoint(const Fit& f, const SolverArgs& a) {
    Checkpoint c;
    c.kind = f.kind;
    c.model = f.factors;
    c.hyperparameters = a.hyperparameters();
    c.objective_history = f.history;
    c.seed = a.seed;
    c.rounds = f.rounds;
    c.converged = f.converged;
    return c;
}

json fit_report(const Fit& f) {
    return {{"model", f.model},
            {"rounds", f.rounds},
            {"converged", f.converged},
            {"final_objective", f.history.back()},
            {"objective_history", f.history},
            {"nr_accepted", f.nr_accepted},
            {"nr_rejected", f.nr_rejected},
            {"nr_rejected_rounds", f.nr_rejected_rounds},
            {"seconds", f.seconds}};
}

std::vector<std::size_t> parse_size_list(const std::vector<std::size_t>& v, const char* what) {
    if (v.empty()) throw input_error(std::string(what) + " must not be empty");
    for (auto x : v)
        if (x == 0) throw input_error(std::string(what) + " entries must be positive");
    return v;
}

// ---- ingest ------------------------------------------------------------------

struct IngestArgs {
    std::string trips, poi, categories, adjacency, holidays, out;
    std::size_t zones = 0;
    std::size_t slices = 24;
    bool workdays_only = false;
};

void run_ingest(const CLI::App& sub, const IngestArgs& a) {
    const fs::path dir = output_dir(a.out);
    std::set<std::string> holidays;
    if (!a.holidays.empty()) {
        auto is = open_input(a.holidays);
        for (const auto& d : read_category_names(is)) holidays.insert(d);
    }
    auto trips_in = open_input(a.trips);
    const TripCsv trips = read_trips_csv(trips_in, a.trips, a.workdays_only, holidays);
    if (a.workdays_only && !trips.records.empty() && !trips.records.front().date)
        throw input_error(a.trips + ": --workdays-only needs a date column");
    const DataTensorBuild built = build_data_tensor(trips.records, a.zones, a.slices);

    std::vector<std::string> names = default_poi_categories();
    if (!a.categories.empty()) {
        auto is = open_input(a.categories);
        names = read_category_names(is);
    }
    auto poi_in = open_input(a.poi);
    const PoiTable poi = read_poi_csv(poi_in, a.zones, names, a.poi);

    Dataset ds{built.tensor, build_context_matrix(poi), std::nullopt};
    if (!a.adjacency.empty()) {
        auto is = open_input(a.adjacency);
        ds.graph = read_adjacency_csv(is, a.zones, a.adjacency);
    }
    save_dataset(dir, ds);

    std::size_t inactive = 0;
    for (bool b : ds.context.active) inactive += !b;
    std::size_t isolated = 0;
    if (ds.graph)
        for (std::size_t x = 0; x < ds.graph->zones(); ++x) isolated += ds.graph->isolated(x);
    const json report = {{"zones", a.zones},
                         {"slices", a.slices},
                         {"trips_read", trips.records.size() + trips.filtered_non_workday},
                         {"trips_accepted", built.accepted},
                         {"trips_out_of_range", built.rejected},
                         {"trips_filtered_non_workday", trips.filtered_non_workday},
                         {"poi_categories", names.size()},
                         {"poi_total", poi.counts.sum()},
                         {"zones_without_poi", inactive},
                         {"graph_edges", ds.graph ? ds.graph->edge_count() : 0},
                         {"isolated_zones", isolated}};
    write_json(dir / "ingest_report.json", report);
    write_manifest(dir, sub, std::nullopt, {"dataset.json", "tensor.odt", "context.odt", "ingest_report.json"});
    std::cout << "ingested " << built.accepted << " trips (" << built.rejected << " out of range, "
              << trips.filtered_non_workday << " non-workday) into " << dir.string() << '\n';
}

// ---- synth -------------------------------------------------------------------

struct SynthArgs {
    PlantSpec spec;
    bool quantize = false;
    std::string out;
};

void run_synth(const CLI::App& sub, const SynthArgs& a) {
    const fs::path dir = output_dir(a.out);
    const SynthCity city = generate(a.spec);
    Dataset ds{a.quantize ? quantized_tensor(city.r) : city.r, city.context, city.graph};
    save_dataset(dir, ds);
    {
        auto os = open_output(dir / "trips.csv");
        write_trips_csv(os, city.r);
    }
    const PoiTable poi = synthetic_poi_table(city);
    {
        auto os = open_output(dir / "poi.csv");
        write_poi_csv(os, poi);
        auto names = open_output(dir / "categories.txt");
        for (const auto& n : poi.category_names) names << n << '\n';
    }
    {
        auto os = open_output(dir / "plant_labels.csv");
        os << "zone,community\n";
        for (std::size_t x = 0; x < city.labels.size(); ++x) os << x << ',' << city.labels[x] << '\n';
    }
    Checkpoint truth;
    truth.model = city.truth;
    truth.hyperparameters.ranks = city.truth.ranks();
    truth.seed = a.spec.seed;
    truth.converged = true;
    write_json(dir / "truth.json", to_json(truth));
    write_manifest(dir, sub, a.spec.seed,
                   {"dataset.json", "tensor.odt", "context.odt", "adjacency.csv", "trips.csv", "poi.csv",
                    "categories.txt", "plant_labels.csv", "truth.json"});
    std::cout << "synthetic city: " << a.spec.zones() << " zones, " << a.spec.communities() << " communities, "
              << a.spec.slices << " slices -> " << dir.string() << '\n';
}

// ---- factorize ---------------------------------------------------------------

struct FactorizeArgs {
    SolverArgs solver;
    std::string data, model = "nr-cntf", out;
    std::size_t cp_rank = 0;
    double rate = 1.0;
};

void run_factorize(const CLI::App& sub, const FactorizeArgs& a) {
    const fs::path dir = output_dir(a.out);
    const Dataset ds = load_dataset(a.data);
    std::optional<SampleMask> mask;
    if (a.rate < 1.0) mask = sample_mask(ds.r.dims(), a.rate, a.solver.seed);
    const std::size_t cp_rank = a.cp_rank ? a.cp_rank : a.solver.h.ranks.time;
    const Fit f = fit(a.model, ds, a.solver, mask ? &*mask : nullptr, cp_rank);
    write_json(dir / "checkpoint.json", to_json(to_checkpoint(f, a.solver)));

    json report = fit_report(f);
    const Tensor3 x = f.factors.reconstruct();
    report["rmse"] = rmse(ds.r, x);
    report["sampling_rate"] = a.rate;
    if (mask) {
        const auto scores = completion_scores(ds.r, x, *mask);
        const SampleMask observed = *mask;
        report["observed_rmse"] = rmse(ds.r, x, &observed);
        report["held_out_rmse"] = scores.held_out_rmse;
    }
    report["seed"] = a.solver.seed;
    write_json(dir / "report.json", report);
    write_manifest(dir, sub, a.solver.seed, {"checkpoint.json", "report.json"});
    std::cout << a.model << ": " << f.rounds << " rounds, objective " << num(f.history.back()) << ", rmse "
              << num(report["rmse"].get<double>()) << '\n';
}

// ---- complete ----------------------------------------------------------------

struct CompleteArgs {
    SolverArgs solver;
    std::string data, out;
    std::vector<double> rates{0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<std::string> models{"nr-cntf", "cntf", "tucker", "cp", "rcp"};
    std::vector<std::size_t> cp_ranks{4, 20};
    std::size_t repeats = 1;
};

void run_complete(const CLI::App& sub, const CompleteArgs& a) {
    const fs::path dir = output_dir(a.out);
    const Dataset ds = load_dataset(a.data);
    (void)parse_size_list(a.cp_ranks, "--cp-ranks");
    if (a.repeats == 0) throw input_error("--repeats must be positive");

    // one column per (model, rank) combination
    std::vector<std::pair<std::string, std::size_t>> columns;
    for (const auto& m : a.models) {
        if (m == "cp" || m == "rcp")
            for (auto k : a.cp_ranks) columns.emplace_back(m, k);
        else
            columns.emplace_back(m, 0);
    }
    const auto label = [](const std::pair<std::string, std::size_t>& c) {
        return c.second ? c.first + "-" + std::to_string(c.second) : c.first;
    };

    auto runs = open_output(dir / "completion_runs.csv");
    runs << "rate,repeat,model,held_out_rmse,rmse,rounds,seconds\n";
    auto table = open_output(dir / "completion.csv");
    table << "rate";
    for (const auto& c : columns) table << ',' << label(c);
    table << '\n';
    json report = json::array();
    for (double rate : a.rates) {
        if (!(rate > 0.0 && rate < 1.0)) throw input_error("completion rates must lie in (0, 1)");
        std::vector<std::vector<double>> held(columns.size());
        for (std::size_t rep = 0; rep < a.repeats; ++rep) {
            SolverArgs s = a.solver;
            s.seed = start_seed(a.solver.seed, rep);
            const SampleMask mask = sample_mask(ds.r.dims(), rate, s.seed);
            for (std::size_t c = 0; c < columns.size(); ++c) {
                const Fit f = fit(columns[c].first, ds, s, &mask, columns[c].second);
                const auto scores = completion_scores(ds.r, f.factors.reconstruct(), mask);
                held[c].push_back(scores.held_out_rmse);
                runs << short_num(rate) << ',' << rep << ',' << label(columns[c]) << ',' << num(scores.held_out_rmse) << ','
                     << num(scores.full_rmse) << ',' << f.rounds << ',' << num(f.seconds) << '\n';
                report.push_back({{"rate", rate},
                                  {"repeat", rep},
                                  {"model", label(columns[c])},
                                  {"held_out_rmse", scores.held_out_rmse},
                                  {"rmse", scores.full_rmse},
                                  {"final_objective", f.history.back()},
                                  {"rounds", f.rounds},
                                  {"nr_accepted", f.nr_accepted},
                                  {"nr_rejected", f.nr_rejected}});
            }
        }
        table << short_num(rate);
        for (auto& v : held) {
            std::sort(v.begin(), v.end());
            const std::size_t n = v.size();
            table << ',' << num(n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
        }
        table << '\n';
        std::cout << "rate " << rate << " done\n";
    }
    write_json(dir / "report.json", {{"runs", report}, {"table", "completion.csv (median held-out RMSE)"}});
    write_manifest(dir, sub, a.solver.seed, {"completion.csv", "completion_runs.csv", "report.json"});
}

// ---- sequence ----------------------------------------------------------------

struct SequenceArgs {
    SolverArgs solver;
    std::string manifest, out;
};

void run_sequence(const CLI::App& sub, const SequenceArgs& a) {
    const fs::path dir = output_dir(a.out);
    const json m = read_json(a.manifest);
    std::vector<std::pair<std::string, fs::path>> years;
    try {
        for (const auto& y : m.at("years")) {
            fs::path p = y.at("data").get<std::string>();
            if (p.is_relative()) p = fs::path(a.manifest).parent_path() / p;
            years.emplace_back(y.at("label").get<std::string>(), p);
        }
    } catch (const json::exception& e) {
        throw input_error(a.manifest + ": " + e.what());
    }
    if (years.empty()) throw input_error(a.manifest + ": no years listed");

    const Hyperparameters h = a.solver.hyperparameters();
    const Dataset first = load_dataset(years.front().second);
    std::optional<NeighborGraph> graph = first.graph;
    const YearLoader load = [&](std::size_t l) {
        Dataset ds = l == 0 ? first : load_dataset(years[l].second);
        if (graph && ds.graph && ds.graph->neighbors != graph->neighbors)
            throw input_error("year '" + years[l].first + "' has a different adjacency graph than year 1");
        return YearInput{years[l].first, std::move(ds.r), std::move(ds.context), std::nullopt};
    };
    const NeighborGraph* g = h.neighbor_regularization && graph ? &*graph : nullptr;
    const PatternSequence seq = pi_tsa(years.size(), load, h, g, a.solver.seed);

    std::vector<std::string> outputs{"drift.csv", "report.json"};
    json report = json::array();
    for (std::size_t l = 0; l < seq.years.size(); ++l) {
        const auto& y = seq.years[l];
        Checkpoint c;
        c.model = y.model;
        c.hyperparameters = h;
        c.objective_history = y.objective_history;
        c.seed = a.solver.seed;
        c.rounds = y.rounds;
        c.converged = y.converged;
        const std::string name = "checkpoint_" + std::to_string(l) + ".json";
        write_json(dir / name, to_json(c));
        outputs.push_back(name);
        report.push_back({{"label", y.label},
                          {"checkpoint", name},
                          {"rounds", y.rounds},
                          {"converged", y.converged},
                          {"final_objective", y.objective_history.back()}});
    }
    auto drift = open_output(dir / "drift.csv");
    drift << "label,origin,destination,time\n";
    json correlations = json::array();
    for (const auto& d : drift_report(seq)) {
        drift << d.label << ',' << num(d.origin) << ',' << num(d.destination) << ',' << num(d.time) << '\n';
        correlations.push_back({{"label", d.label},
                                {"origin", matrix_to_json(d.origin_correlation)},
                                {"destination", matrix_to_json(d.destination_correlation)}});
    }
    write_json(dir / "report.json", {{"years", report}, {"column_correlation", correlations}});
    write_manifest(dir, sub, a.solver.seed, outputs);
    std::cout << "sequence of " << seq.years.size() << " years written to " << dir.string() << '\n';
}

// ---- sweep -------------------------------------------------------------------

struct SweepArgs {
    SolverArgs solver;
    std::string data, model = "nr-cntf", out;
    double rate = 0.8;
    std::vector<std::size_t> ij{2, 4, 6, 8, 10};
    std::vector<std::size_t> k{1, 2, 3, 4, 5};
};

void run_sweep(const CLI::App& sub, const SweepArgs& a) {
    const fs::path dir = output_dir(a.out);
    const Dataset ds = load_dataset(a.data);
    if (!(a.rate > 0.0 && a.rate <= 1.0)) throw input_error("--rate must lie in (0, 1]");
    (void)parse_size_list(a.ij, "--ij");
    (void)parse_size_list(a.k, "--k");
    const SampleMask mask = sample_mask(ds.r.dims(), a.rate, a.solver.seed);
    const bool held_out = a.rate < 1.0;

    const auto cell = [&](std::size_t ij, std::size_t k, std::ostream& os, std::size_t axis) {
        SolverArgs s = a.solver;
        s.h.ranks = {ij, ij, k};
        const Fit f = fit(a.model, ds, s, &mask, k);
        const Tensor3 x = f.factors.reconstruct();
        const SampleMask held = mask.complement();
        os << axis << ',' << num(rmse(ds.r, x)) << ',' << (held_out ? num(rmse(ds.r, x, &held)) : "") << ','
           << num(f.history.back()) << '\n';
    };
    auto by_ij = open_output(dir / "sweep_ij.csv");
    by_ij << "ij,rmse,held_out_rmse,final_objective\n";
    for (auto ij : a.ij) cell(ij, a.solver.h.ranks.time, by_ij, ij);
    auto by_k = open_output(dir / "sweep_k.csv");
    by_k << "k,rmse,held_out_rmse,final_objective\n";
    for (auto k : a.k) cell(a.solver.h.ranks.origin, k, by_k, k);
    write_manifest(dir, sub, a.solver.seed, {"sweep_ij.csv", "sweep_k.csv"});
    std::cout << "sweep written to " << dir.string() << '\n';
}

// ---- analyze -----------------------------------------------------------------

struct AnalyzeArgs {
    std::string checkpoint, reference, out;
    std::vector<std::string> reports;
};

// Label accuracy over the patterns that actually hold zones; null when too many
// remain for exhaustive matching.
json matched_accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth,
                      std::size_t labels) {
    const auto compact = [labels](const std::vector<std::size_t>& v) {
        std::vector<std::size_t> id(labels, labels);
        std::size_t next = 0;
        std::vector<std::size_t> out;
        for (auto l : v) {
            if (id[l] == labels) id[l] = next++;
            out.push_back(id[l]);
        }
        return std::pair{out, next};
    };
    const auto [p, np] = compact(predicted);
    const auto [t, nt] = compact(truth);
    const std::size_t used = std::max(np, nt);
    if (used > 9) return nullptr;
    return label_accuracy(p, t, used);
}

void run_analyze(const CLI::App& sub, const AnalyzeArgs& a) {
    const fs::path dir = output_dir(a.out);
    const Checkpoint c = checkpoint_from_json(read_json(a.checkpoint));
    const FactorModel& m = c.model;
    const Ranks ranks = m.ranks();
    const auto wants = [&](const std::string& r) {
        return a.reports.empty() || std::find(a.reports.begin(), a.reports.end(), r) != a.reports.end();
    };
    json summary = {{"zones", m.zones()},
                    {"slices", m.slices()},
                    {"ranks", {ranks.origin, ranks.destination, ranks.time}},
                    {"kind", c.kind}};
    std::vector<std::string> outputs{"analysis.json"};

    const auto origin = assign_communities(m.origin);
    const auto destination = assign_communities(m.destination);
    if (wants("communities")) {
        auto os = open_output(dir / "communities.csv");
        os << "zone,origin_pattern,destination_pattern\n";
        for (std::size_t x = 0; x < m.zones(); ++x)
            os << x << ',' << origin.labels[x] << ',' << destination.labels[x] << '\n';
        auto ps = open_output(dir / "patterns.csv");
        ps << "side,pattern,members,status\n";
        const auto dump = [&](const char* side, const CommunityAssignment& as) {
            for (std::size_t i = 0; i < as.members.size(); ++i)
                ps << side << ',' << i << ',' << as.members[i].size() << ','
                   << (as.empty_pattern(i) ? "empty" : "active") << '\n';
        };
        dump("origin", origin);
        dump("destination", destination);
        outputs.insert(outputs.end(), {"communities.csv", "patterns.csv"});
    }
    if (wants("rhythms")) {
        const Matrix tr = rescaled_coefficients(m);
        const Vector u = pattern_energies(m);
        auto os = open_output(dir / "rhythms.csv");
        os << "slice";
        for (std::size_t k = 0; k < ranks.time; ++k) os << ",rhythm_" << k;
        os << '\n';
        for (Eigen::Index z = 0; z < tr.rows(); ++z) {
            os << z;
            for (Eigen::Index k = 0; k < tr.cols(); ++k) os << ',' << num(tr(z, k));
            os << '\n';
        }
        auto es = open_output(dir / "energy.csv");
        es << "rhythm,energy\n";
        for (Eigen::Index k = 0; k < u.size(); ++k) es << k << ',' << num(u(k)) << '\n';
        outputs.insert(outputs.end(), {"rhythms.csv", "energy.csv"});
    }
    const Tensor3 cprime = concentrated_core(m);
    if (wants("core")) {
        auto os = open_output(dir / "concentrated_core.csv");
        os << "origin_pattern,destination_pattern,rhythm,value\n";
        for (std::size_t k = 0; k < ranks.time; ++k)
            for (std::size_t j = 0; j < ranks.destination; ++j)
                for (std::size_t i = 0; i < ranks.origin; ++i)
                    os << i << ',' << j << ',' << k << ',' << num(cprime(i, j, k)) << '\n';
        outputs.push_back("concentrated_core.csv");
    }
    if (wants("intensity")) {
        if (ranks.origin != ranks.destination) {
            if (!a.reports.empty())
                throw input_error("intensity report needs I = J, checkpoint has I = " + std::to_string(ranks.origin) +
                                  ", J = " + std::to_string(ranks.destination));
            summary["intensity"] = "skipped: I != J";
        } else {
            const auto rep = inter_intra_intensity(cprime);
            auto os = open_output(dir / "intensity.csv");
            os << "community,inter,intra\n";
            for (Eigen::Index x = 0; x < rep.inter.size(); ++x)
                os << x << ',' << num(rep.inter(x)) << ',' << num(rep.intra(x)) << '\n';
            outputs.push_back("intensity.csv");
        }
    }
    if (!a.reference.empty()) {
        const Checkpoint ref = checkpoint_from_json(read_json(a.reference));
        if (ref.model.zones() != m.zones())
            throw input_error("reference has " + std::to_string(ref.model.zones()) + " zones, checkpoint has " +
                              std::to_string(m.zones()));
        const auto truth_o = assign_communities(ref.model.origin).labels;
        const auto truth_d = assign_communities(ref.model.destination).labels;
        const std::size_t lo = std::max(ranks.origin, ref.model.ranks().origin);
        const std::size_t ld = std::max(ranks.destination, ref.model.ranks().destination);
        summary["origin_label_accuracy"] = matched_accuracy(origin.labels, truth_o, lo);
        summary["destination_label_accuracy"] = matched_accuracy(destination.labels, truth_d, ld);
    }
    write_json(dir / "analysis.json", summary);
    write_manifest(dir, sub, c.seed, outputs);
    std::cout << "analysis written to " << dir.string() << '\n';
}

}  // namespace
}  // namespace odt::cli

int main(int argc, char** argv) {
    using namespace odt::cli;
    CLI::App app{"Spatiotemporal pattern analysis of origin-destination flows", "odt"};
    app.set_version_flag("--version", std::string(ODT_VERSION));
    app.require_subcommand(1);
    app.config_formatter(std::make_shared<JsonConfig>());

    std::deque<std::pair<CLI::App*, std::string>> configs;  // stable addresses for the bound paths
    const auto configure = [&configs](CLI::App* sub) {
        configs.emplace_back(sub, "");
        sub->add_option("--config", configs.back().second, "JSON file of option values; flags override it")
            ->configurable(false);
    };

    IngestArgs ingest;
    auto* s_ingest = app.add_subcommand("ingest", "Build a dataset directory from trip, POI and adjacency CSVs");
    configure(s_ingest);
    s_ingest->add_option("--trips", ingest.trips, "vid,origin_zone,dest_zone,slice[,date] CSV")->required();
    s_ingest->add_option("--poi", ingest.poi, "zone,category,count CSV")->required();
    s_ingest->add_option("--categories", ingest.categories, "Category names, one per line (default: 14 built-in)");
    s_ingest->add_option("--adjacency", ingest.adjacency, "zone_a,zone_b CSV of neighboring zones");
    s_ingest->add_option("--zones", ingest.zones, "Zone count M")->required()->check(CLI::PositiveNumber);
    s_ingest->add_option("--slices", ingest.slices, "Time slices per day N")->capture_default_str()->check(CLI::PositiveNumber);
    s_ingest->add_flag("--workdays-only", ingest.workdays_only, "Drop weekend and holiday trips (needs a date column)");
    s_ingest->add_option("--holidays", ingest.holidays, "Holiday dates YYYY-MM-DD, one per line");
    s_ingest->add_option("--out", ingest.out, "Output directory");

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth", "Generate a synthetic city with planted patterns");
    configure(s_synth);
    s_synth->add_option("--grid-rows", synth.spec.grid_rows)->capture_default_str();
    s_synth->add_option("--grid-cols", synth.spec.grid_cols)->capture_default_str();
    s_synth->add_option("--block-rows", synth.spec.block_rows)->capture_default_str();
    s_synth->add_option("--block-cols", synth.spec.block_cols)->capture_default_str();
    s_synth->add_option("--slices", synth.spec.slices)->capture_default_str();
    s_synth->add_option("--rhythms", synth.spec.rhythms)->capture_default_str();
    s_synth->add_option("--noise", synth.spec.noise_sigma, "Gaussian noise sigma")->capture_default_str();
    s_synth->add_option("--perturbation", synth.spec.membership_perturbation)->capture_default_str();
    s_synth->add_option("--intra", synth.spec.intra_weight)->capture_default_str();
    s_synth->add_option("--tidal", synth.spec.tidal_weight)->capture_default_str();
    s_synth->add_option("--background", synth.spec.background_weight)->capture_default_str();
    s_synth->add_option("--seed", synth.spec.seed)->capture_default_str();
    s_synth->add_flag("--quantize", synth.quantize, "Store ln(1 + count) of the emitted trips instead of the raw tensor");
    s_synth->add_option("--out", synth.out, "Output directory");

    FactorizeArgs factorize;
    auto* s_fact = app.add_subcommand("factorize", "Fit one model to a dataset");
    configure(s_fact);
    s_fact->add_option("--data", factorize.data, "Dataset directory")->required();
    s_fact->add_option("--model", factorize.model)->capture_default_str()->check(CLI::IsMember(kModels));
    s_fact->add_option("--cp-rank", factorize.cp_rank, "CP rank (default: --rank-time)");
    s_fact->add_option("--rate", factorize.rate, "Sampling rate; below 1 the fit sees a random mask")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    add_solver_options(s_fact, factorize.solver);
    s_fact->add_option("--out", factorize.out, "Output directory");

    CompleteArgs complete;
    auto* s_comp = app.add_subcommand("complete", "Held-out completion RMSE per sampling rate and model");
    configure(s_comp);
    s_comp->add_option("--data", complete.data, "Dataset directory")->required();
    s_comp->add_option("--rates", complete.rates)->capture_default_str()->delimiter(',');
    s_comp->add_option("--models", complete.models)->capture_default_str()->delimiter(',')->check(CLI::IsMember(kModels));
    s_comp->add_option("--cp-ranks", complete.cp_ranks)->capture_default_str()->delimiter(',');
    s_comp->add_option("--repeats", complete.repeats, "Masks per rate; the table reports medians")->capture_default_str();
    add_solver_options(s_comp, complete.solver);
    s_comp->add_option("--out", complete.out, "Output directory");

    SequenceArgs sequence;
    auto* s_seq = app.add_subcommand("sequence", "Fit yearly datasets in order, each starting from the previous year");
    configure(s_seq);
    s_seq->add_option("--manifest", sequence.manifest, R"(JSON {"years": [{"label": ..., "data": dir}, ...]})")
        ->required();
    add_solver_options(s_seq, sequence.solver);
    s_seq->add_option("--out", sequence.out, "Output directory");

    SweepArgs sweep;
    auto* s_sweep = app.add_subcommand("sweep", "RMSE against the pattern counts I = J and K");
    configure(s_sweep);
    s_sweep->add_option("--data", sweep.data, "Dataset directory")->required();
    s_sweep->add_option("--model", sweep.model)->capture_default_str()->check(CLI::IsMember(kModels));
    s_sweep->add_option("--rate", sweep.rate)->capture_default_str();
    s_sweep->add_option("--ij", sweep.ij, "I = J values (K fixed at --rank-time)")->capture_default_str()->delimiter(',');
    s_sweep->add_option("--k", sweep.k, "K values (I = J fixed at --rank-origin)")->capture_default_str()->delimiter(',');
    add_solver_options(s_sweep, sweep.solver);
    s_sweep->add_option("--out", sweep.out, "Output directory");

    AnalyzeArgs analyze;
    auto* s_an = app.add_subcommand("analyze", "Community, rhythm, core and intensity tables from a checkpoint");
    configure(s_an);
    s_an->add_option("--checkpoint", analyze.checkpoint)->required();
    s_an->add_option("--reference", analyze.reference, "Checkpoint whose communities are compared with these");
    s_an->add_option("--reports", analyze.reports, "Subset of communities,rhythms,core,intensity")
        ->delimiter(',')
        ->check(CLI::IsMember({"communities", "rhythms", "core", "intensity"}));
    s_an->add_option("--out", analyze.out, "Output directory");

    try {
        app.parse(argc, argv);
        for (auto& [sub, path] : configs)
            if (sub->parsed() && !path.empty()) apply_config(sub, path);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (s_ingest->parsed()) run_ingest(*s_ingest, ingest);
        else if (s_synth->parsed()) run_synth(*s_synth, synth);
        else if (s_fact->parsed()) run_factorize(*s_fact, factorize);
        else if (s_comp->parsed()) run_complete(*s_comp, complete);
        else if (s_seq->parsed()) run_sequence(*s_seq, sequence);
        else if (s_sweep->parsed()) run_sweep(*s_sweep, sweep);
        else if (s_an->parsed()) run_analyze(*s_an, analyze);
    } catch (const odt::input_error& e) {
        std::cerr << "odt: input error: " << e.what() << '\n';
        return 2;
    } catch (const odt::solver_error& e) {
        std::cerr << "odt: solver failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "odt: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
