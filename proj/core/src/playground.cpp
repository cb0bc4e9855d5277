#include "cbfw/playground.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "cbfw/certify.hpp"

namespace cbfw::playground {

namespace {

using nlohmann::json;

std::vector<double> to_std(const Vec& v)
{
    return {v.data(), v.data() + v.size()};
}

json finite_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

json record_json(const StepRecord& r)
{
    json j = to_json(r);
    j["collision"] = is_collision(r.clearance);
    j["solver_failure"] = r.solver_failure;
    return j;
}

json barrier_json(const Barrier& b)
{
    json j{{"kind", std::string(to_string(b.kind))}};
    switch (b.kind) {
    case BarrierKind::Circle:
        j["center"] = {b.center.x(), b.center.y()};
        j["combined_radius"] = b.combined_radius;
        break;
    case BarrierKind::Segment:
        j["link"] = b.link_index;
        j["center"] = {b.center.x(), b.center.y()};
        j["combined_radius"] = b.combined_radius;
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

const json& object_or_empty(const json& payload)
{
    static const json empty = json::object();
    if (payload.is_null()) return empty;
    if (!payload.is_object()) throw ProtocolError("bad_request", "payload must be an object", "payload");
    return payload;
}

double number_field(const json& payload, const char* key)
{
    const json& v = payload.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>()))
        throw ProtocolError("invalid_params", std::string(key) + " must be a finite number", key);
    return v.get<double>();
}

double positive_field(const json& payload, const char* key)
{
    const double v = number_field(payload, key);
    if (!(v > 0.0)) throw ProtocolError("invalid_params", std::string(key) + " must be positive", key);
    return v;
}

std::string string_field(const json& payload, const char* key)
{
    const json& v = payload.at(key);
    if (!v.is_string()) throw ProtocolError("invalid_params", std::string(key) + " must be a string", key);
    return v.get<std::string>();
}

long long integer_field(const json& payload, const char* key, long long lo, long long hi)
{
    const json& v = payload.at(key);
    if (!v.is_number_integer())
        throw ProtocolError("invalid_params", std::string(key) + " must be an integer", key);
    const auto n = v.get<long long>();
    if (n < lo || n > hi)
        throw ProtocolError("invalid_params",
                            std::string(key) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]",
                            key);
    return n;
}

Vec vector_field(const json& payload, const char* key)
{
    const json& v = payload.at(key);
    if (!v.is_array()) throw ProtocolError("invalid_params", std::string(key) + " must be an array", key);
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number() || !std::isfinite(v[i].get<double>()))
            throw ProtocolError("invalid_params", std::string(key) + " entries must be finite numbers", key);
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
}

Vec2 vec2_field(const json& payload, const char* key)
{
    const Vec v = vector_field(payload, key);
    if (v.size() != 2) throw ProtocolError("invalid_params", std::string(key) + " must have 2 entries", key);
    return {v[0], v[1]};
}

/// Filter family, gains, bounds and v_max from a payload onto cfg.
void apply_filter_fields(TrialConfig& cfg, const json& payload)
{
    if (payload.contains("filter")) {
        const auto family = parse_filter_family(string_field(payload, "filter"));
        if (!family) throw ProtocolError("invalid_params", "unknown filter family", "filter");
        cfg.filter.family = *family;
        cfg.filter.bounds = default_input_bounds(*family);
    }
    for (const char* key : {"gamma", "gamma1", "gamma2"}) {
        if (!payload.contains(key)) continue;
        const double g = positive_field(payload, key);
        if (std::string_view(key) == "gamma") cfg.filter.gamma = g;
        if (std::string_view(key) == "gamma1") cfg.filter.gamma1 = g;
        if (std::string_view(key) == "gamma2") cfg.filter.gamma2 = g;
    }
    if (payload.contains("bounds")) {
        const auto bounds = parse_input_bounds(string_field(payload, "bounds"));
        if (!bounds) throw ProtocolError("invalid_params", "bounds must be in-qp or clamp-after", "bounds");
        cfg.filter.bounds = *bounds;
    }
    if (payload.contains("v_max")) cfg.v_max = positive_field(payload, "v_max");
    if (payload.contains("kp")) cfg.gains.kp = positive_field(payload, "kp");
    if (payload.contains("kd")) cfg.gains.kd = positive_field(payload, "kd");
    if (payload.contains("nominal")) {
        const std::string n = string_field(payload, "nominal");
        if (n == "goal") cfg.nominal = NominalPolicy::GoalSeeking;
        else if (n == "zero") cfg.nominal = NominalPolicy::Zero;
        else throw ProtocolError("invalid_params", "nominal must be goal or zero", "nominal");
    }
}

void check_config(const TrialConfig& cfg)
{
    if (cfg.kind != SystemKind::DoubleIntegrator && cfg.filter.family == FilterFamily::Hocbf)
        throw ProtocolError("invalid_params", "hocbf needs the double integrator", "filter");
    if (cfg.kind == SystemKind::DoubleIntegrator && cfg.filter.family == FilterFamily::Cbf)
        throw ProtocolError("invalid_params", "cbf cannot constrain the double integrator; use hocbf or naive",
                            "filter");
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw ProtocolError("invalid_params", e.what());
    }
}

/// sup over the box of the residual of the row the filter builds for b.
double field_margin(const FilterSpec& spec, const SystemModel& model, const Barrier& b, const State& x)
{
    switch (spec.family) {
    case FilterFamily::Cbf: return pointwise_margin(model, b, {spec.gamma, std::nullopt}, x);
    case FilterFamily::Hocbf:
        if (relative_degree(b, model) == 2) return pointwise_margin(model, b, {spec.gamma1, spec.gamma2}, x);
        return pointwise_margin(model, b, {spec.gamma1, std::nullopt}, x);
    case FilterFamily::Naive: {
        const QpRow row = constraint_row(spec, b, model, x);
        return row.a.cwiseAbs().dot(model.input_box) - row.b;
    }
    }
    return 0.0;
}

std::pair<double, double> default_range(const Environment& env, const SystemModel& model, int dim)
{
    if (model.kind == SystemKind::Manipulator3) return {-std::numbers::pi, std::numbers::pi};
    if (dim < 2) return {env.workspace.lo[dim], env.workspace.hi[dim]};
    return {-model.input_box[0], model.input_box[0]};
}

}  // namespace

TrialConfig init_config(const json& payload_in)
{
    const json& payload = object_or_empty(payload_in);
    if (!payload.contains("system")) throw ProtocolError("invalid_params", "system is required", "system");
    const auto kind = parse_system_kind(string_field(payload, "system"));
    if (!kind) throw ProtocolError("invalid_params", "unknown system", "system");

    TrialConfig cfg;
    cfg.kind = *kind;
    cfg.record_trace = true;
    cfg.stop_on_collision = false;
    cfg.filter.family = cfg.kind == SystemKind::DoubleIntegrator ? FilterFamily::Hocbf : FilterFamily::Cbf;
    cfg.filter.bounds = default_input_bounds(cfg.filter.family);
    if (payload.contains("seed")) {
        const json& s = payload.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
            throw ProtocolError("invalid_params", "seed must be a nonnegative integer", "seed");
        cfg.seed = s.get<std::uint64_t>();
    }
    if (payload.contains("dt")) {
        cfg.sim.dt = positive_field(payload, "dt");
        cfg.filter.dt = cfg.sim.dt;
    }
    apply_filter_fields(cfg, payload);

    if (payload.contains("environment")) {
        try {
            cfg.environment = environment_from_json(payload.at("environment"));
        } catch (const std::exception& e) {
            throw ProtocolError("invalid_params", std::string("environment: ") + e.what(), "environment");
        }
    }
    check_config(cfg);
    Environment env = trial_environment(cfg);
    if (payload.contains("obstacles")) {
        const json& list = payload.at("obstacles");
        if (!list.is_array()) throw ProtocolError("invalid_params", "obstacles must be an array", "obstacles");
        env.obstacles.clear();
        for (const auto& o : list) {
            if (!o.is_object() || !o.contains("center"))
                throw ProtocolError("invalid_params", "each obstacle needs a center", "obstacles");
            Obstacle ob;
            ob.center = vec2_field(o, "center");
            if (o.contains("radius")) ob.radius = positive_field(o, "radius");
            env.obstacles.push_back(ob);
        }
    }
    if (payload.contains("goal")) env.goal = vec2_field(payload, "goal");
    cfg.environment = env;
    return cfg;
}

Session::Session(std::string id, TrialConfig cfg) : id_(std::move(id)), cfg_(std::move(cfg))
{
    if (!cfg_.environment) cfg_.environment = trial_environment(cfg_);
    rebuild();
    x_ = cfg_.environment->start;
}

void Session::rebuild()
{
    loop_ = std::make_unique<ClosedLoop>(cfg_.model(), *cfg_.environment, cfg_.filter, cfg_.gains, cfg_.nominal);
}

json Session::snapshot() const
{
    const SystemModel& model = loop_->model();
    json barriers = json::array();
    for (const auto& b : loop_->barriers()) barriers.push_back(barrier_json(b));
    return {
        {"session", id_},
        {"system", std::string(to_string(cfg_.kind))},
        {"step", k_},
        {"t", static_cast<double>(k_) * cfg_.sim.dt},
        {"state", to_std(x_)},
        {"paused", !running_},
        {"rate_hz", rate_hz_},
        {"params",
         {{"filter", std::string(to_string(cfg_.filter.family))},
          {"gamma", cfg_.filter.gamma},
          {"gamma1", cfg_.filter.gamma1},
          {"gamma2", cfg_.filter.gamma2},
          {"bounds", std::string(to_string(cfg_.filter.bounds))},
          {"v_max", cfg_.v_max},
          {"dt", cfg_.sim.dt},
          {"kp", cfg_.gains.kp},
          {"kd", cfg_.gains.kd},
          {"nominal", cfg_.nominal == NominalPolicy::Zero ? "zero" : "goal"},
          {"seed", cfg_.seed}}},
        {"input_box", to_std(model.input_box)},
        {"environment", to_json(*cfg_.environment)},
        {"barriers", barriers},
        {"h", to_std(loop_->barrier_values(x_))},
        {"clearance", finite_or_null(min_clearance(*cfg_.environment, model, x_))},
        {"task_position", {task_position(model, x_).x(), task_position(model, x_).y()}},
        {"collided", collided_},
        {"infeasible_steps", infeasible_steps_},
    };
}

json Session::handle(const std::string& type, const json& payload_in)
{
    const json& payload = object_or_empty(payload_in);
    if (type == "set_params") return on_set_params(payload);
    if (type == "set_state") return on_set_state(payload);
    if (type == "step") return on_step(payload);
    if (type == "run") return on_run(payload);
    if (type == "pause") {
        running_ = false;
        owed_ = 0.0;
        return snapshot();
    }
    if (type == "query_feasibility_field") return on_feasibility_field(payload);
    if (type == "query_input_set") return on_input_set();
    if (type == "get_trace") return on_get_trace(payload);
    if (type == "reset") return on_reset();
    if (type == "snapshot") return snapshot();
    throw ProtocolError("unknown_type", "unknown message type: " + type, "type");
}

json Session::on_set_params(const json& payload)
{
    TrialConfig next = cfg_;
    apply_filter_fields(next, payload);
    if (payload.contains("goal")) next.environment->goal = vec2_field(payload, "goal");
    if (payload.contains("obstacles")) {
        const json& list = payload.at("obstacles");
        if (!list.is_array()) throw ProtocolError("invalid_params", "obstacles must be an array", "obstacles");
        next.environment->obstacles.clear();
        for (const auto& o : list) {
            if (!o.is_object() || !o.contains("center"))
                throw ProtocolError("invalid_params", "each obstacle needs a center", "obstacles");
            Obstacle ob;
            ob.center = vec2_field(o, "center");
            if (o.contains("radius")) ob.radius = positive_field(o, "radius");
            next.environment->obstacles.push_back(ob);
        }
    }
    check_config(next);
    cfg_ = std::move(next);
    rebuild();
    return snapshot();
}

json Session::on_set_state(const json& payload)
{
    const char* key = payload.contains("state") ? "state" : "x";
    if (!payload.contains(key)) throw ProtocolError("invalid_params", "state is required", "state");
    const Vec x = vector_field(payload, key);
    if (x.size() != loop_->model().state_dim)
        throw ProtocolError("invalid_params",
                            "state must have " + std::to_string(loop_->model().state_dim) + " entries", "state");
    x_ = x;
    return snapshot();
}

StepRecord Session::advance()
{
    StepRecord r = loop_->advance(x_, k_);
    ++k_;
    x_ = r.x;
    collided_ = collided_ || is_collision(r.clearance);
    if (!r.feasible) ++infeasible_steps_;
    trace_.push_back(r);
    if (trace_.size() > kTraceCapacity) trace_.pop_front();
    return r;
}

json Session::on_step(const json& payload)
{
    const int count = payload.contains("count") ? static_cast<int>(integer_field(payload, "count", 1, kMaxStepCount)) : 1;
    json records = json::array();
    for (int i = 0; i < count; ++i) records.push_back(record_json(advance()));
    return {{"records", records}, {"step", k_}, {"collided", collided_}, {"infeasible_steps", infeasible_steps_}};
}

json Session::on_run(const json& payload)
{
    if (payload.contains("rate_hz")) {
        const double rate = positive_field(payload, "rate_hz");
        if (rate > 10000.0) throw ProtocolError("invalid_params", "rate_hz must not exceed 10000", "rate_hz");
        rate_hz_ = rate;
    }
    running_ = true;
    owed_ = 0.0;
    return snapshot();
}

std::vector<StepRecord> Session::pump(double elapsed)
{
    std::vector<StepRecord> out;
    if (!running_ || !(elapsed > 0.0)) return out;
    owed_ += elapsed * rate_hz_;
    const int n = static_cast<int>(std::min<double>(std::floor(owed_), kMaxStepCount));
    owed_ = std::min(owed_ - n, 1.0);
    for (int i = 0; i < n; ++i) out.push_back(advance());
    return out;
}

json Session::on_feasibility_field(const json& payload) const
{
    const SystemModel& model = loop_->model();
    const Environment& env = *cfg_.environment;
    std::array<int, 2> dims{0, 1};
    if (payload.contains("dims")) {
        const json& d = payload.at("dims");
        if (!d.is_array() || d.size() != 2 || !d[0].is_number_integer() || !d[1].is_number_integer())
            throw ProtocolError("invalid_params", "dims must be two state indices", "dims");
        dims = {d[0].get<int>(), d[1].get<int>()};
    } else if (model.kind == SystemKind::DoubleIntegrator) {
        dims = {0, 2};  // (p_x, v_x)
    }
    for (int d : dims)
        if (d < 0 || d >= model.state_dim) throw ProtocolError("invalid_params", "dims out of range", "dims");
    if (dims[0] == dims[1]) throw ProtocolError("invalid_params", "dims must differ", "dims");

    std::array<int, 2> res{50, 50};
    if (payload.contains("resolution")) {
        const json& r = payload.at("resolution");
        if (r.is_number_integer()) {
            res = {r.get<int>(), r.get<int>()};
        } else if (r.is_array() && r.size() == 2 && r[0].is_number_integer() && r[1].is_number_integer()) {
            res = {r[0].get<int>(), r[1].get<int>()};
        } else {
            throw ProtocolError("invalid_params", "resolution must be an integer or a pair", "resolution");
        }
    }
    for (int r : res) {
        if (r < 1) throw ProtocolError("invalid_params", "resolution must be positive", "resolution");
        if (r > kMaxFieldResolution)
            throw ProtocolError("resolution_cap", "resolution exceeds 200 per axis", "resolution");
    }

    std::array<std::pair<double, double>, 2> ranges{default_range(env, model, dims[0]),
                                                    default_range(env, model, dims[1])};
    if (payload.contains("ranges")) {
        const json& r = payload.at("ranges");
        if (!r.is_array() || r.size() != 2)
            throw ProtocolError("invalid_params", "ranges must be two [lo, hi] pairs", "ranges");
        for (int a = 0; a < 2; ++a) {
            const Vec2 lh = vec2_field(json{{"ranges", r[static_cast<std::size_t>(a)]}}, "ranges");
            if (!(lh[1] >= lh[0])) throw ProtocolError("invalid_params", "ranges need lo <= hi", "ranges");
            ranges[static_cast<std::size_t>(a)] = {lh[0], lh[1]};
        }
    }

    std::vector<std::size_t> selected;
    const auto& barriers = loop_->barriers();
    if (payload.contains("barrier")) {
        const auto i = integer_field(payload, "barrier", 0, static_cast<long long>(barriers.size()) - 1);
        selected.push_back(static_cast<std::size_t>(i));
    } else {
        for (std::size_t i = 0; i < barriers.size(); ++i) selected.push_back(i);
    }

    const auto coord = [&](int axis, int i) {
        const auto& [lo, hi] = ranges[static_cast<std::size_t>(axis)];
        const int n = res[static_cast<std::size_t>(axis)];
        return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    };
    json axis0 = json::array(), axis1 = json::array();
    for (int i = 0; i < res[0]; ++i) axis0.push_back(coord(0, i));
    for (int j = 0; j < res[1]; ++j) axis1.push_back(coord(1, j));

    json margins = json::array();
    State x = x_;
    for (int i = 0; i < res[0]; ++i) {
        json row = json::array();
        x[dims[0]] = coord(0, i);
        for (int j = 0; j < res[1]; ++j) {
            x[dims[1]] = coord(1, j);
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t b : selected) m = std::min(m, field_margin(cfg_.filter, model, barriers[b], x));
            row.push_back(finite_or_null(m));
        }
        margins.push_back(std::move(row));
    }
    return {{"dims", dims},
            {"resolution", res},
            {"axis0", axis0},
            {"axis1", axis1},
            {"fixed_state", to_std(x_)},
            {"margins", margins}};
}

json Session::on_input_set() const
{
    const QpProblem p = loop_->problem_at(x_);
    const Vec& box = loop_->model().input_box;
    json rows = json::array();
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        const QpRow& r = p.rows[i];
        // Satisfied by every input in the actuator box.
        const bool redundant = -r.a.cwiseAbs().dot(box) - r.b >= 0.0;
        rows.push_back({{"barrier", i}, {"a", to_std(r.a)}, {"b", r.b}, {"redundant", redundant}});
    }
    json qp_box = json::array();
    for (Eigen::Index j = 0; j < p.box.size(); ++j) qp_box.push_back(finite_or_null(p.box[j]));
    return {{"rows", rows},
            {"box", to_std(box)},
            {"qp_box", qp_box},
            {"bounds", std::string(to_string(cfg_.filter.bounds))},
            {"u_nom", to_std(p.u_nom)},
            {"feasible", feasible(p)}};
}

json Session::on_get_trace(const json& payload) const
{
    std::size_t limit = trace_.size();
    if (payload.contains("limit"))
        limit = static_cast<std::size_t>(integer_field(payload, "limit", 0, static_cast<long long>(kTraceCapacity)));
    limit = std::min(limit, trace_.size());
    json records = json::array();
    for (auto it = trace_.end() - static_cast<std::ptrdiff_t>(limit); it != trace_.end(); ++it)
        records.push_back(record_json(*it));
    return {{"records", records}, {"capacity", kTraceCapacity}, {"step", k_}};
}

json Session::on_reset()
{
    x_ = cfg_.environment->start;
    k_ = 0;
    running_ = false;
    owed_ = 0.0;
    collided_ = false;
    infeasible_steps_ = 0;
    trace_.clear();
    return snapshot();
}

// ---------------------------------------------------------------------------

json hello()
{
    return {{"protocol_version", kProtocolVersion},
            {"models", {"single-integrator", "double-integrator", "manipulator"}},
            {"filters", {"cbf", "hocbf", "naive"}},
            {"messages",
             {"hello", "init", "set_params", "set_state", "step", "run", "pause", "query_feasibility_field",
              "query_input_set", "get_trace", "reset", "snapshot", "close"}}};
}

json error_reply(const json& request_id, const std::string& type, const std::string& code, const std::string& message,
                 const std::string& field)
{
    json err{{"code", code}, {"message", message}};
    if (!field.empty()) err["field"] = field;
    return {{"protocol_version", kProtocolVersion}, {"id", request_id}, {"type", type}, {"ok", false}, {"error", err}};
}

namespace {

const std::set<std::string>& session_types()
{
    static const std::set<std::string> types{"set_params", "set_state", "step", "run", "pause",
                                             "query_feasibility_field", "query_input_set", "get_trace",
                                             "reset", "snapshot", "close"};
    return types;
}

json ok_reply(const json& request_id, const std::string& type, const std::string& session, json result)
{
    json r{{"protocol_version", kProtocolVersion}, {"id", request_id}, {"type", type}, {"ok", true}};
    if (!session.empty()) r["session"] = session;
    r["result"] = std::move(result);
    return r;
}

}  // namespace

std::shared_ptr<SessionManager::Entry> SessionManager::find(const std::string& id) const
{
    std::lock_guard g(lock_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionManager::session_count() const
{
    std::lock_guard g(lock_);
    return sessions_.size();
}

json SessionManager::handle(const json& request)
{
    if (!request.is_object()) return error_reply(nullptr, "", "bad_request", "request must be a JSON object");
    const json id = request.contains("id") ? request.at("id") : json(nullptr);
    const json& type_j = request.contains("type") ? request.at("type") : json(nullptr);
    if (!type_j.is_string()) return error_reply(id, "", "bad_request", "type must be a string", "type");
    const std::string type = type_j.get<std::string>();
    if (!id.is_number_integer()) return error_reply(id, type, "bad_request", "id must be an integer", "id");
    const json payload = request.contains("payload") ? request.at("payload") : json::object();

    try {
        if (type == "hello") return ok_reply(id, type, "", hello());
        if (type == "init") {
            TrialConfig cfg = init_config(payload);
            auto entry = std::make_shared<Entry>();
            std::string sid;
            {
                std::lock_guard g(lock_);
                sid = "s" + std::to_string(next_id_++);
            }
            entry->session = std::make_unique<Session>(sid, std::move(cfg));
            entry->last_id = id.get<std::int64_t>();
            json snap = entry->session->snapshot();
            {
                std::lock_guard g(lock_);
                sessions_.emplace(sid, entry);
            }
            return ok_reply(id, type, sid, std::move(snap));
        }
        if (!session_types().count(type))
            return error_reply(id, type, "unknown_type", "unknown message type: " + type, "type");

        const json& sid_j = request.contains("session") ? request.at("session") : json(nullptr);
        if (!sid_j.is_string()) return error_reply(id, type, "bad_request", "session must be a string", "session");
        const std::string sid = sid_j.get<std::string>();
        const auto entry = find(sid);
        if (!entry) return error_reply(id, type, "unknown_session", "no session " + sid, "session");

        std::lock_guard g(entry->lock);
        const auto rid = id.get<std::int64_t>();
        if (entry->last_id && rid <= *entry->last_id)
            return error_reply(id, type, "stale_id", "request ids must increase within a session", "id");
        entry->last_id = rid;
        if (type == "close") {
            std::lock_guard g2(lock_);
            sessions_.erase(sid);
            return ok_reply(id, type, sid, json::object());
        }
        return ok_reply(id, type, sid, entry->session->handle(type, payload));
    } catch (const ProtocolError& e) {
        return error_reply(id, type, e.code(), e.what(), e.field());
    } catch (const json::exception& e) {
        return error_reply(id, type, "invalid_params", e.what());
    } catch (const ContractViolation& e) {
        return error_reply(id, type, "invalid_params", e.what());
    } catch (const std::invalid_argument& e) {
        return error_reply(id, type, "invalid_params", e.what());
    } catch (const GenerationError& e) {
        return error_reply(id, type, "generation_failed", e.what());
    } catch (const std::exception& e) {
        return error_reply(id, type, "internal", e.what());
    }
}

std::string SessionManager::handle_text(std::string_view text)
{
    json request;
    try {
        request = json::parse(text);
    } catch (const json::parse_error& e) {
        return error_reply(nullptr, "", "parse_error", e.what()).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    }
    return handle(request).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::vector<json> SessionManager::pump(double elapsed)
{
    std::vector<std::pair<std::string, std::shared_ptr<Entry>>> all;
    {
        std::lock_guard g(lock_);
        all.assign(sessions_.begin(), sessions_.end());
    }
    std::vector<json> events;
    for (auto& [sid, entry] : all) {
        std::lock_guard g(entry->lock);
        const auto records = entry->session->pump(elapsed);
        if (records.empty()) continue;
        json list = json::array();
        for (const auto& r : records) list.push_back(record_json(r));
        events.push_back({{"protocol_version", kProtocolVersion},
                          {"type", "step_event"},
                          {"session", sid},
                          {"records", list}});
    }
    return events;
}

// ---------------------------------------------------------------------------

std::string encode_frame(std::string_view payload)
{
    if (payload.size() > kMaxFrameBytes) throw ProtocolError("frame_too_large", "frame exceeds the size limit");
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(payload.size() + 4);
    out.push_back(static_cast<char>((n >> 24) & 0xff));
    out.push_back(static_cast<char>((n >> 16) & 0xff));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
    out.append(payload);
    return out;
}

void FrameDecoder::feed(std::string_view bytes)
{
    buffer_.append(bytes);
}

std::optional<std::string> FrameDecoder::next()
{
    if (buffer_.size() < 4) return std::nullopt;
    const auto byte = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i])); };
    const std::uint32_t n = (byte(0) << 24) | (byte(1) << 16) | (byte(2) << 8) | byte(3);
    if (n > kMaxFrameBytes) throw ProtocolError("frame_too_large", "frame exceeds the size limit");
    if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    std::string payload = buffer_.substr(4, n);
    buffer_.erase(0, 4 + static_cast<std::size_t>(n));
    return payload;
}

}  // namespace cbfw::playground
