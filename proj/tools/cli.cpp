#include "cli.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cbfw/bench.hpp"
#include "cbfw/playground.hpp"
#include "serve.hpp"

#ifndef CBFW_VERSION
#define CBFW_VERSION "0.0.0"
#endif

namespace cbfw::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kArtifactVersion = "cbfw " CBFW_VERSION;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& content)
{
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << content;
    if (!f.flush()) throw IoError("cannot write " + path.string());
}

std::string read_text(const fs::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

int default_jobs()
{
    if (const char* env = std::getenv("CBF_WORKBENCH_JOBS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Shortest text that parses back to the same double.
std::string shortest(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Resolved flags of one command, recorded in the manifest and replayed by rerun.
struct Resolved {
    std::string command;
    std::vector<std::pair<std::string, std::string>> flags;

    void set(const std::string& name, const std::string& value) { flags.emplace_back(name, value); }
    void set(const std::string& name, double value) { flags.emplace_back(name, shortest(value)); }

    std::vector<std::string> args() const
    {
        std::vector<std::string> out;
        for (const auto& [k, v] : flags) {
            if (v == "__flag__") {
                out.push_back("--" + k);
            } else {
                out.push_back("--" + k + "=" + v);
            }
        }
        return out;
    }
};

void write_manifest(const fs::path& path, const Resolved& r, std::uint64_t seed, const std::vector<std::string>& outputs,
                    double seconds)
{
    json config = json::object();
    for (const auto& [k, v] : r.flags) config[k] = v == "__flag__" ? json(true) : json(v);
    const json doc{{"command", r.command},
                   {"args", r.args()},
                   {"config", config},
                   {"master_seed", seed},
                   {"artifact_version", kArtifactVersion},
                   {"outputs", outputs},
                   {"duration_s", seconds}};
    write_text(path, doc.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// trial

struct TrialFlags {
    std::string system;
    std::string filter;
    double gamma = 1.0;
    double gamma1 = 1.0;
    double gamma2 = 1.0;
    double vmax = 2.0;
    std::uint64_t seed = 0;
    std::string trace_out;
    double dt = 0.01;
    int max_steps = 3000;
    double goal_tolerance = 0.1;
    std::string bounds;
    std::string nominal = "goal";
    std::string layout = "corridor";
    std::string environment;
    bool stop_on_collision = false;
};

void add_trial_options(CLI::App* sub, TrialFlags& f)
{
    sub->add_option("--system", f.system, "single-integrator | double-integrator | manipulator")->required();
    sub->add_option("--filter", f.filter, "cbf | hocbf | naive (default: cbf, hocbf for the double integrator)");
    sub->add_option("--gamma", f.gamma, "class-K gain of the cbf family");
    sub->add_option("--gamma1", f.gamma1, "first HOCBF gain (double integrator)");
    sub->add_option("--gamma2", f.gamma2, "second HOCBF gain (double integrator)");
    sub->add_option("--vmax", f.vmax, "speed envelope of the double integrator (m/s)");
    sub->add_option("--seed", f.seed, "environment seed");
    sub->add_option("--trace-out", f.trace_out, "write the per-step trace as JSON lines");
    sub->add_option("--dt", f.dt, "time step (s)");
    sub->add_option("--max-steps", f.max_steps, "step budget");
    sub->add_option("--goal-tolerance", f.goal_tolerance, "goal radius (m)");
    sub->add_option("--bounds", f.bounds, "in-qp | clamp-after (default depends on the family)");
    sub->add_option("--nominal", f.nominal, "goal | zero")->check(CLI::IsMember({"goal", "zero"}));
    sub->add_option("--layout", f.layout, "obstacle layout: corridor | uniform")
        ->check(CLI::IsMember({"corridor", "uniform"}));
    sub->add_option("--environment", f.environment, "environment JSON file instead of sampling");
    sub->add_flag("--stop-on-collision", f.stop_on_collision, "end the trial at the first contact");
}

TrialConfig trial_config(const CLI::App& sub, const TrialFlags& f, Resolved& r)
{
    const auto kind = parse_system_kind(f.system);
    if (!kind) throw UsageError("unknown --system " + f.system);
    const bool di = *kind == SystemKind::DoubleIntegrator;
    const auto given = [&](const char* name) { return sub.count(name) > 0; };

    TrialConfig cfg;
    cfg.kind = *kind;
    cfg.filter.family = di ? FilterFamily::Hocbf : FilterFamily::Cbf;
    if (!f.filter.empty()) {
        const auto family = parse_filter_family(f.filter);
        if (!family) throw UsageError("unknown --filter " + f.filter);
        cfg.filter.family = *family;
    }
    const FilterFamily fam = cfg.filter.family;
    if (!di && (given("--gamma1") || given("--gamma2")))
        throw UsageError("--gamma1/--gamma2 need --system double-integrator");
    if (!di && given("--vmax")) throw UsageError("--vmax needs --system double-integrator");
    if (fam == FilterFamily::Hocbf && !di) throw UsageError("--filter hocbf needs --system double-integrator");
    if (fam == FilterFamily::Cbf && di)
        throw UsageError("--filter cbf cannot constrain the double integrator; use hocbf or naive");
    if (fam != FilterFamily::Cbf && given("--gamma")) throw UsageError("--gamma applies to --filter cbf");
    if (fam != FilterFamily::Hocbf && (given("--gamma1") || given("--gamma2")))
        throw UsageError("--gamma1/--gamma2 apply to --filter hocbf");
    for (double g : {f.gamma, f.gamma1, f.gamma2})
        if (!(g > 0.0)) throw UsageError("gamma must be positive");
    if (!(f.dt > 0.0)) throw UsageError("--dt must be positive");
    if (f.max_steps < 1) throw UsageError("--max-steps must be at least 1");
    if (!(f.vmax > 0.0)) throw UsageError("--vmax must be positive");
    if (!(f.goal_tolerance >= 0.0)) throw UsageError("--goal-tolerance must be nonnegative");

    cfg.filter.gamma = f.gamma;
    cfg.filter.gamma1 = f.gamma1;
    cfg.filter.gamma2 = f.gamma2;
    cfg.filter.dt = f.dt;
    cfg.filter.bounds = default_input_bounds(fam);
    if (!f.bounds.empty()) {
        const auto b = parse_input_bounds(f.bounds);
        if (!b) throw UsageError("--bounds must be in-qp or clamp-after");
        cfg.filter.bounds = *b;
    }
    cfg.v_max = f.vmax;
    cfg.seed = f.seed;
    cfg.sim.dt = f.dt;
    cfg.sim.max_steps = f.max_steps;
    cfg.sim.goal_tolerance = f.goal_tolerance;
    cfg.nominal = f.nominal == "zero" ? NominalPolicy::Zero : NominalPolicy::GoalSeeking;
    cfg.world.layout = parse_obstacle_layout(f.layout);
    cfg.stop_on_collision = f.stop_on_collision;
    if (!f.environment.empty()) {
        try {
            cfg.environment = environment_from_json(json::parse(read_text(f.environment)));
        } catch (const IoError&) {
            throw;
        } catch (const std::exception& e) {
            throw UsageError("--environment: " + std::string(e.what()));
        }
        if (cfg.environment->kind != cfg.kind) throw UsageError("--environment was built for another system");
    }

    r.command = "trial";
    r.set("system", std::string(to_string(cfg.kind)));
    r.set("filter", std::string(to_string(fam)));
    if (fam == FilterFamily::Cbf) r.set("gamma", f.gamma);
    if (fam == FilterFamily::Hocbf) {
        r.set("gamma1", f.gamma1);
        r.set("gamma2", f.gamma2);
    }
    if (di) r.set("vmax", f.vmax);
    r.set("seed", std::to_string(f.seed));
    r.set("dt", f.dt);
    r.set("max-steps", std::to_string(f.max_steps));
    r.set("goal-tolerance", f.goal_tolerance);
    r.set("bounds", std::string(to_string(cfg.filter.bounds)));
    r.set("nominal", f.nominal);
    r.set("layout", f.layout);
    if (!f.environment.empty()) r.set("environment", f.environment);
    if (f.stop_on_collision) r.set("stop-on-collision", "__flag__");
    return cfg;
}

int cmd_trial(const CLI::App& sub, const TrialFlags& f, std::ostream& out)
{
    const auto t0 = std::chrono::steady_clock::now();
    Resolved r;
    TrialConfig cfg = trial_config(sub, f, r);
    cfg.record_trace = !f.trace_out.empty();
    const TrialResult res = run_trial(cfg);

    json summary = summary_json(res);
    summary["system"] = std::string(to_string(cfg.kind));
    summary["filter"] = std::string(to_string(cfg.filter.family));
    summary["seed"] = cfg.seed;
    out << summary.dump(2) << "\n";

    if (!f.trace_out.empty()) {
        r.set("trace-out", f.trace_out);
        write_text(f.trace_out, trace_jsonl(res.trace));
        write_manifest(f.trace_out + ".manifest.json", r, cfg.seed, {f.trace_out}, seconds_since(t0));
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepFlags {
    int table = 0;
    int trials = 100;
    std::uint64_t seed = 42;
    std::string out;
    int jobs = 0;
    int max_steps = 3000;
    std::string layout = "corridor";
    bool continue_after_collision = false;
};

int cmd_sweep(const CLI::App& sub, const SweepFlags& f, std::ostream& out)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto id = parse_table_id(f.table);
    if (!id) throw UsageError("--table must be 1, 2 or 3");
    if (f.trials < 1) throw UsageError("--trials must be at least 1");
    if (f.max_steps < 1) throw UsageError("--max-steps must be at least 1");

    SweepOptions opts;
    opts.trials_per_cell = f.trials;
    opts.master_seed = f.seed;
    opts.jobs = sub.count("--jobs") ? f.jobs : default_jobs();
    if (opts.jobs < 1) throw UsageError("--jobs must be at least 1");
    opts.sim.max_steps = f.max_steps;
    opts.world.layout = parse_obstacle_layout(f.layout);
    opts.stop_on_collision = !f.continue_after_collision;

    const fs::path dir = f.out.empty() ? fs::path("results") / ("table" + std::to_string(f.table)) : fs::path(f.out);
    ensure_dir(dir);

    const SweepTable table = run_sweep(*id, opts);
    const std::string stem = "table" + std::to_string(f.table);
    std::vector<std::string> outputs;
    for (const auto& [ext, fmt] : {std::pair{".csv", TableFormat::Csv}, std::pair{".md", TableFormat::Markdown},
                                   std::pair{".json", TableFormat::Json}}) {
        const fs::path p = dir / (stem + ext);
        write_text(p, emit_table(table, fmt));
        outputs.push_back(p.string());
    }

    Resolved r;
    r.command = "sweep";
    r.set("table", std::to_string(f.table));
    r.set("trials", std::to_string(f.trials));
    r.set("seed", std::to_string(f.seed));
    r.set("out", dir.string());
    r.set("jobs", std::to_string(opts.jobs));
    r.set("max-steps", std::to_string(f.max_steps));
    r.set("layout", f.layout);
    if (f.continue_after_collision) r.set("continue-after-collision", "__flag__");
    write_manifest(dir / "manifest.json", r, f.seed, outputs, seconds_since(t0));

    out << emit_table(table, TableFormat::Markdown);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// certify

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& what)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("bad number for " + what + ": '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument("bad number for " + what + ": '" + s + "'");
    return v;
}

int parse_int(const std::string& s, const std::string& what)
{
    const double v = parse_double(s, what);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw std::invalid_argument(what + " must be an integer");
    return static_cast<int>(v);
}

Vec2 parse_vec2(const std::string& s, const std::string& what)
{
    const auto parts = split(s, ',');
    if (parts.size() != 2) throw std::invalid_argument(what + " needs two comma-separated numbers");
    return {parse_double(parts[0], what), parse_double(parts[1], what)};
}

json barrier_to_json(const Barrier& b)
{
    json j{{"kind", std::string(to_string(b.kind))}};
    switch (b.kind) {
    case BarrierKind::Circle:
    case BarrierKind::Segment:
        j["center"] = {b.center.x(), b.center.y()};
        j["radius"] = b.combined_radius;
        if (b.kind == BarrierKind::Segment) j["link"] = b.link_index;
        break;
    case BarrierKind::VelocityBound: j["v_max"] = b.v_max; break;
    case BarrierKind::Wall:
    case BarrierKind::ViabilityWall:
        j["normal"] = {b.normal.x(), b.normal.y()};
        j["offset"] = b.offset;
        if (b.kind == BarrierKind::ViabilityWall) j["u_max"] = b.u_max;
        break;
    }
    return j;
}

struct CertifyFlags {
    std::string system;
    std::string barrier_spec;
    std::uint64_t seed = 0;
    double gamma = 1.0;
    double gamma2 = 0.0;
    double vmax = 2.0;
    std::string grid;
    bool whole_grid = false;
    std::string out;
    int jobs = 0;
    int max_violations = 100;
};

int cmd_certify(const CLI::App& sub, const CertifyFlags& f, std::ostream& out)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto kind = parse_system_kind(f.system);
    if (!kind) throw UsageError("unknown --system " + f.system);
    if (!(f.gamma > 0.0)) throw UsageError("gamma must be positive");
    const bool hocbf = sub.count("--gamma2") > 0;
    if (hocbf && !(f.gamma2 > 0.0)) throw UsageError("gamma2 must be positive");
    if (hocbf && *kind != SystemKind::DoubleIntegrator) throw UsageError("--gamma2 needs --system double-integrator");
    if (f.max_violations < 0) throw UsageError("--max-violations must be nonnegative");

    TrialConfig tc;
    tc.kind = *kind;
    tc.v_max = f.vmax;
    const SystemModel model = tc.model();

    std::vector<SpecEntry> entries;
    if (!f.barrier_spec.empty()) {
        entries = parse_barrier_spec(read_text(f.barrier_spec), model);
    } else {
        const Environment env = sample_environment(f.seed, model);
        for (const auto& b : benchmark_barriers(env, model)) entries.push_back({0, b});
    }

    DomainGrid grid = default_grid(model);
    if (!f.grid.empty()) {
        try {
            grid = parse_grid(f.grid);
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("--grid: ") + e.what());
        }
    }
    if (static_cast<int>(grid.axes.size()) != model.state_dim)
        throw UsageError("--grid needs " + std::to_string(model.state_dim) + " axes for this system");
    try {
        grid.validate();
    } catch (const std::exception& e) {
        throw UsageError(std::string("--grid: ") + e.what());
    }

    const int jobs = sub.count("--jobs") ? f.jobs : default_jobs();
    if (jobs < 1) throw UsageError("--jobs must be at least 1");

    json barriers = json::array();
    std::size_t total = 0;
    for (const auto& e : entries) {
        CertifyGains gains{f.gamma, std::nullopt};
        if (hocbf && relative_degree(e.barrier, model) == 2) gains.gamma2 = f.gamma2;
        const FeasibilityReport rep = scan_domain(model, e.barrier, gains, grid, !f.whole_grid, jobs);
        total += rep.violations.size();
        json item{{"barrier", barrier_to_json(e.barrier)},
                  {"relative_degree", relative_degree(e.barrier, model)},
                  {"report", to_json(rep, static_cast<std::size_t>(f.max_violations))}};
        if (e.line) item["line"] = e.line;
        barriers.push_back(std::move(item));
    }
    json axes = json::array();
    for (const auto& a : grid.axes) axes.push_back({{"min", a.min}, {"max", a.max}, {"count", a.count}});
    json report{{"system", std::string(to_string(model.kind))},
                {"gamma", f.gamma},
                {"gamma2", hocbf ? json(f.gamma2) : json(nullptr)},
                {"grid", axes},
                {"restrict_to_safe", !f.whole_grid},
                {"barriers", barriers},
                {"violation_count", total},
                {"verdict", total == 0 ? "certified" : "violations"}};

    if (!f.out.empty()) {
        write_text(f.out, report.dump(2) + "\n");
        Resolved r;
        r.command = "certify";
        r.set("system", std::string(to_string(model.kind)));
        if (!f.barrier_spec.empty()) r.set("barrier-spec", f.barrier_spec);
        r.set("seed", std::to_string(f.seed));
        r.set("gamma", f.gamma);
        if (hocbf) r.set("gamma2", f.gamma2);
        r.set("vmax", f.vmax);
        std::string g;
        for (const auto& a : grid.axes) {
            g += (g.empty() ? "" : ",") + shortest(a.min) + ":" + shortest(a.max) + ":" + std::to_string(a.count);
        }
        r.set("grid", g);
        if (f.whole_grid) r.set("whole-grid", "__flag__");
        r.set("out", f.out);
        r.set("jobs", std::to_string(jobs));
        r.set("max-violations", std::to_string(f.max_violations));
        write_manifest(f.out + ".manifest.json", r, f.seed, {f.out}, seconds_since(t0));
    }
    json brief = report;
    for (auto& b : brief["barriers"]) b["report"].erase("violations");
    out << brief.dump(2) << "\n";
    return total == 0 ? kExitOk : kExitViolations;
}

// ---------------------------------------------------------------------------
// serve

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int)
{
    g_interrupted = true;
}

struct ServeFlags {
    std::string host = "127.0.0.1";
    int port = 8765;
    std::string static_dir;
    int http_port = -1;
    double duration = 0.0;
};

int cmd_serve(const ServeFlags& f, std::ostream& out, std::ostream& err)
{
    serve::FramedServer framed;
    std::string error;
    if (!framed.listen(f.host, f.port, error)) {
        err << "serve: " << error << "\n";
        return kExitIo;
    }
    std::stop_source stop;
    std::jthread socket_thread([&] { framed.serve(stop.get_token()); });

    std::jthread http_thread;
    std::atomic<int> http_port{0};
    std::atomic<bool> http_failed{false};
    const bool want_http = !f.static_dir.empty() || f.http_port >= 0;
    if (want_http) {
        serve::HttpOptions h;
        h.host = f.host;
        h.port = f.http_port >= 0 ? f.http_port : 0;
        if (!f.static_dir.empty()) h.static_dir = f.static_dir;
        http_thread = std::jthread([&, h] {
            std::string e;
            if (!serve::run_http(h, stop.get_token(), e, &http_port)) {
                err << "serve: " << e << "\n";
                http_failed = true;
            }
        });
        while (http_port == 0 && !http_failed) std::this_thread::sleep_for(std::chrono::milliseconds(5));
        if (http_failed) {
            stop.request_stop();
            return kExitIo;
        }
    }

    out << "listening on " << f.host << ":" << framed.port() << " (framed JSON)";
    if (want_http) out << ", http on " << f.host << ":" << http_port.load();
    out << std::endl;

    g_interrupted = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const auto t0 = std::chrono::steady_clock::now();
    while (!g_interrupted && (f.duration <= 0.0 || seconds_since(t0) < f.duration))
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    stop.request_stop();
    return kExitOk;
}

// ---------------------------------------------------------------------------

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth);

int cmd_rerun(const std::string& manifest_path, const std::string& out_override, std::ostream& out,
              std::ostream& err, int depth)
{
    if (depth > 0) throw UsageError("rerun manifests cannot nest");
    json m;
    try {
        m = json::parse(read_text(manifest_path));
    } catch (const json::exception& e) {
        throw UsageError("manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!m.contains("command") || !m.contains("args")) throw UsageError("manifest lacks command/args");
    std::vector<std::string> args{"cbfw", m.at("command").get<std::string>()};
    const std::string command = args[1];
    for (const auto& a : m.at("args")) {
        std::string s = a.get<std::string>();
        if (!out_override.empty()) {
            if (command == "sweep" && s.rfind("--out=", 0) == 0) s = "--out=" + out_override;
            if (command == "certify" && s.rfind("--out=", 0) == 0)
                s = "--out=" + (fs::path(out_override) / fs::path(s.substr(6)).filename()).string();
            if (command == "trial" && s.rfind("--trace-out=", 0) == 0)
                s = "--trace-out=" + (fs::path(out_override) / fs::path(s.substr(12)).filename()).string();
        }
        args.push_back(s);
    }
    if (!out_override.empty()) ensure_dir(out_override);
    return dispatch(args, out, err, depth + 1);
}

/**
 * Splices the key=value entries of `--config FILE` into the argument list as
 * --key=value, skipping keys already given as flags (flags win).
 */
std::vector<std::string> apply_config_file(const std::vector<std::string>& args)
{
    std::vector<std::string> rest;
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (path.empty()) return rest;
    if (!fs::exists(path)) throw IoError("cannot read config file " + path);
    const auto given = [&](const std::string& name) {
        return std::any_of(rest.begin(), rest.end(), [&](const std::string& a) {
            return a == "--" + name || a.rfind("--" + name + "=", 0) == 0;
        });
    };
    for (const auto& item : CLI::ConfigTOML().from_file(path)) {
        if (item.name == "++" || item.name == "--" || !item.parents.empty()) continue;
        if (given(item.name)) continue;
        std::string value;
        for (const auto& v : item.inputs) value += (value.empty() ? "" : ",") + v;
        rest.push_back("--" + item.name + "=" + value);
    }
    return rest;
}

int dispatch(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err, int depth)
{
    std::vector<std::string> args;
    try {
        args = apply_config_file(args_in);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const CLI::ParseError& e) {
        err << "error: config file: " << e.what() << "\n";
        return kExitUsage;
    }

    CLI::App app{"Control barrier function workbench: trials, sweeps, certification and the playground bridge",
                 "cbfw"};
    app.set_version_flag("--version", kArtifactVersion);
    app.require_subcommand(1);

    TrialFlags tf;
    auto* trial = app.add_subcommand("trial", "Run one closed-loop trial and print its summary");
    add_trial_options(trial, tf);
    trial->add_option("--config", "flat key=value file mirroring flag names; flags override it");

    SweepFlags sf;
    auto* sweep = app.add_subcommand("sweep", "Run one of the benchmark tables");
    sweep->add_option("--table", sf.table, "1, 2 or 3")->required();
    sweep->add_option("--trials", sf.trials, "trials per cell");
    sweep->add_option("--seed", sf.seed, "master seed");
    sweep->add_option("--out", sf.out, "output directory (default results/table<N>)");
    sweep->add_option("--jobs", sf.jobs, "worker threads (default $CBF_WORKBENCH_JOBS or all cores)");
    sweep->add_option("--max-steps", sf.max_steps, "step budget per trial");
    sweep->add_option("--layout", sf.layout, "obstacle layout: corridor | uniform")
        ->check(CLI::IsMember({"corridor", "uniform"}));
    sweep->add_flag("--continue-after-collision", sf.continue_after_collision,
                    "latch collisions and keep stepping instead of ending the trial");
    sweep->add_option("--config", "flat key=value file mirroring flag names; flags override it");

    CertifyFlags cf;
    auto* certify = app.add_subcommand("certify", "Scan a grid for states with no admissible input");
    certify->add_option("--system", cf.system, "single-integrator | double-integrator | manipulator")->required();
    certify->add_option("--barrier-spec", cf.barrier_spec, "barrier file (default: benchmark obstacles of --seed)");
    certify->add_option("--seed", cf.seed, "environment seed for the built-in barriers");
    certify->add_option("--gamma", cf.gamma, "class-K gain (gamma1 with --gamma2)");
    certify->add_option("--gamma2", cf.gamma2, "second gain; relative-degree-2 barriers use the HOCBF test");
    certify->add_option("--vmax", cf.vmax, "speed envelope of the double integrator");
    certify->add_option("--grid", cf.grid, "min:max:count per state axis, comma separated");
    certify->add_flag("--whole-grid", cf.whole_grid, "also test points outside the safe set (h < 0)");
    certify->add_option("--out", cf.out, "write the full report here");
    certify->add_option("--jobs", cf.jobs, "worker threads");
    certify->add_option("--max-violations", cf.max_violations, "violations listed in the report");
    certify->add_option("--config", "flat key=value file mirroring flag names; flags override it");

    ServeFlags vf;
    auto* serve_cmd = app.add_subcommand("serve", "Expose the playground protocol on a local socket");
    serve_cmd->add_option("--host", vf.host, "bind address");
    serve_cmd->add_option("--port", vf.port, "framed JSON port (0 picks one)");
    serve_cmd->add_option("--static-dir", vf.static_dir, "serve the built frontend over http");
    serve_cmd->add_option("--http-port", vf.http_port, "http port for the frontend and POST /api (0 picks one)");
    serve_cmd->add_option("--duration", vf.duration, "stop after this many seconds (0 runs until interrupted)");

    std::string manifest, rerun_out;
    auto* rerun = app.add_subcommand("rerun", "Repeat a command from its manifest");
    rerun->add_option("--manifest", manifest, "manifest.json written by a previous run")->required();
    rerun->add_option("--out", rerun_out, "redirect outputs to this directory");

    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion& e) {
        out << kArtifactVersion << "\n";
        return kExitOk;
    } catch (const CLI::FileError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const auto sub = app.get_subcommands();
        err << (sub.empty() ? app.help() : sub.front()->help());
        return kExitUsage;
    }

    try {
        if (trial->parsed()) return cmd_trial(*trial, tf, out);
        if (sweep->parsed()) return cmd_sweep(*sweep, sf, out);
        if (certify->parsed()) return cmd_certify(*certify, cf, out);
        if (serve_cmd->parsed()) return cmd_serve(vf, out, err);
        if (rerun->parsed()) return cmd_rerun(manifest, rerun_out, out, err, depth);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SpecError& e) {
        err << "error: barrier spec " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const GenerationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace

std::vector<SpecEntry> parse_barrier_spec(const std::string& text, const SystemModel& model)
{
    std::vector<SpecEntry> out;
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream words(raw);
        std::string kind_name;
        if (!(words >> kind_name)) continue;

        std::map<std::string, std::string> kv;
        std::string word;
        while (words >> word) {
            const auto eq = word.find('=');
            if (eq == std::string::npos || eq == 0) throw SpecError(line, "expected key=value, got '" + word + "'");
            const std::string key = word.substr(0, eq);
            if (kv.count(key)) throw SpecError(line, "duplicate key '" + key + "'");
            kv[key] = word.substr(eq + 1);
        }
        const auto kind = parse_barrier_kind(kind_name);
        if (!kind) throw SpecError(line, "unknown barrier kind '" + kind_name + "'");

        const auto take = [&](const std::string& key) {
            const auto it = kv.find(key);
            if (it == kv.end()) throw SpecError(line, kind_name + " needs " + key + "=");
            std::string v = it->second;
            kv.erase(it);
            return v;
        };
        try {
            Barrier b;
            switch (*kind) {
            case BarrierKind::Circle: {
                const Vec2 c = parse_vec2(take("center"), "center");
                b = Barrier::circle(c, parse_double(take("radius"), "radius"));
                break;
            }
            case BarrierKind::Segment: {
                const int link = parse_int(take("link"), "link");
                const Vec2 c = parse_vec2(take("center"), "center");
                b = Barrier::segment(link, c, parse_double(take("radius"), "radius"));
                break;
            }
            case BarrierKind::VelocityBound: b = Barrier::velocity_bound(parse_double(take("v_max"), "v_max")); break;
            case BarrierKind::Wall: {
                const Vec2 n = parse_vec2(take("normal"), "normal");
                b = Barrier::wall(n, parse_double(take("offset"), "offset"));
                break;
            }
            case BarrierKind::ViabilityWall: {
                const Vec2 n = parse_vec2(take("normal"), "normal");
                const double c = parse_double(take("offset"), "offset");
                b = Barrier::viability_wall(n, c, parse_double(take("u_max"), "u_max"));
                break;
            }
            }
            if (!kv.empty()) throw SpecError(line, "unknown key '" + kv.begin()->first + "'");
            b.validate();
            require_compatible(b, model);
            out.push_back({line, b});
        } catch (const SpecError&) {
            throw;
        } catch (const std::exception& e) {
            throw SpecError(line, e.what());
        }
    }
    if (out.empty()) throw SpecError(line == 0 ? 1 : line, "no barriers in spec");
    return out;
}

DomainGrid parse_grid(const std::string& text)
{
    DomainGrid g;
    for (const auto& part : split(text, ',')) {
        const auto f = split(part, ':');
        if (f.size() != 3) throw std::invalid_argument("axis '" + part + "' is not min:max:count");
        GridAxis a{parse_double(f[0], "min"), parse_double(f[1], "max"), parse_int(f[2], "count")};
        g.axes.push_back(a);
    }
    return g;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    if (args.empty()) return kExitUsage;
    return dispatch(args, out, err, 0);
}

}  // namespace cbfw::cli
