#include "teleop/protocol.hpp"

#include <json.hpp>

#include "teleop/scenario_io.hpp"

namespace teleop {

using nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json pose(const Pose& p) {
  return {{"p", vec(p.p)}, {"q", json::array({p.q.w(), p.q.x(), p.q.y(), p.q.z()})}};
}

json header(std::string_view type) { return {{"v", kProtocolVersion}, {"type", type}}; }

[[noreturn]] void invalid(const std::string& what) { throw ProtocolError("invalid", what); }

const json& field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) invalid(std::string("missing field '") + key + "'");
  return obj[key];
}

double num(const json& obj, const char* key) {
  const json& j = field(obj, key);
  if (!j.is_number()) invalid(std::string("field '") + key + "' must be a number");
  return j.get<double>();
}

std::int64_t integer(const json& obj, const char* key) {
  const json& j = field(obj, key);
  if (!j.is_number_integer()) invalid(std::string("field '") + key + "' must be an integer");
  return j.get<std::int64_t>();
}

bool boolean(const json& obj, const char* key) {
  const json& j = field(obj, key);
  if (!j.is_boolean()) invalid(std::string("field '") + key + "' must be a boolean");
  return j.get<bool>();
}

std::string str(const json& obj, const char* key) {
  const json& j = field(obj, key);
  if (!j.is_string()) invalid(std::string("field '") + key + "' must be a string");
  return j.get<std::string>();
}

Vec3 vec_of(const json& obj, const char* key) {
  const json& j = field(obj, key);
  if (!j.is_array() || j.size() != 3) invalid(std::string("field '") + key + "' must be [x, y, z]");
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number()) invalid(std::string("field '") + key + "' must hold numbers");
    v[k] = j[k].get<double>();
  }
  return v;
}

Pose pose_of(const json& obj, const char* key) {
  const json& j = field(obj, key);
  Pose out;
  out.p = vec_of(j, "p");
  const json& q = field(j, "q");
  if (!q.is_array() || q.size() != 4) invalid(std::string(key) + ".q must be [w, x, y, z]");
  for (const auto& c : q) {
    if (!c.is_number()) invalid(std::string(key) + ".q must hold numbers");
  }
  out.q = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  return out;
}

template <class F>
auto wrap(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ProtocolError("invalid", e.what());
  } catch (const json::exception& e) {
    throw ProtocolError("invalid", e.what());
  }
}

json parse_frame(std::string_view text, std::string& type) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ProtocolError("malformed", std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("malformed", "frame must be a JSON object");
  if (!j.contains("v") || !j["v"].is_number_integer()) {
    throw ProtocolError("malformed", "frame is missing the integer schema version 'v'");
  }
  const auto v = j["v"].get<std::int64_t>();
  if (v != kProtocolVersion) {
    throw ProtocolError("version", "unsupported schema version " + std::to_string(v) + " (server speaks " +
                                       std::to_string(kProtocolVersion) + ")");
  }
  if (!j.contains("type") || !j["type"].is_string()) throw ProtocolError("malformed", "frame is missing 'type'");
  type = j["type"].get<std::string>();
  return j;
}

json record_json(const TrialRecord& r) {
  return {{"agent_id", r.agent_id},
          {"condition", std::string(to_string(r.condition))},
          {"task_type", std::string(to_string(r.task_type))},
          {"target_index", r.target_index},
          {"completed", r.completed},
          {"completion_time_s", r.completion_time},
          {"drop_count", r.drop_count},
          {"flip_count", r.flip_count}};
}

InputMessage input_from(const json& j) {
  return wrap([&] {
    InputMessage m;
    m.timestamp = num(j, "t");
    m.hand = hand_from_string(str(j, "hand"));
    m.state.pose = pose_of(j, "pose");
    const json& tw = field(j, "twist");
    m.state.twist.v = vec_of(tw, "v");
    m.state.twist.w = vec_of(tw, "w");
    m.clutch = boolean(j, "clutch");
    return m;
  });
}

ControlMessage control_from(const json& j) {
  return wrap([&] {
    ControlMessage m;
    m.command = control_command_from_string(str(j, "command"));
    if (j.contains("condition")) m.condition = condition_from_string(str(j, "condition"));
    if (j.contains("scenario")) m.scenario = scenario_from_json(j["scenario"]);
    if (m.command == ControlCommand::kSetCondition && !m.condition) invalid("set-condition needs 'condition'");
    if (m.command == ControlCommand::kLoadScenario && !m.scenario) invalid("load-scenario needs 'scenario'");
    return m;
  });
}

StateSnapshot snapshot_from(const json& j) {
  return wrap([&] {
    StateSnapshot s;
    s.tick = integer(j, "tick");
    s.clock = num(j, "clock");
    s.condition = condition_from_string(str(j, "condition"));
    s.box = pose_of(j, "box");
    const json& effs = field(j, "effectors");
    if (!effs.is_array() || effs.size() != 2) invalid("'effectors' must hold two entries");
    for (int i = 0; i < 2; ++i) {
      const json& e = effs[i];
      if (hand_from_string(str(e, "hand")) != static_cast<Hand>(i)) invalid("effectors must be ordered left, right");
      Wrench w;
      const json& wj = field(e, "wrench");
      w.f = vec_of(wj, "f");
      w.tau = vec_of(wj, "tau");
      std::optional<Pose> target;
      if (e.contains("target")) target = pose_of(e, "target");
      // The offset on the wire is informational; it is always recomputed.
      s.effectors[i] = EffectorSnapshot::make(pose_of(e, "pose"), w, boolean(e, "clutch"), target);
    }
    if (j.contains("target")) {
      const json& t = j["target"];
      ActiveTargetSnapshot a;
      a.index = static_cast<int>(integer(t, "index"));
      a.pose = pose_of(t, "pose");
      a.pos_tol = num(t, "pos_tol");
      a.rot_tol = num(t, "rot_tol");
      s.target = a;
    }
    const json& st = field(j, "status");
    s.status.state = trial_state_from_string(str(st, "state"));
    s.status.target_index = static_cast<int>(integer(st, "target_index"));
    s.status.target_count = static_cast<int>(integer(st, "target_count"));
    s.status.completed_count = static_cast<int>(integer(st, "completed_count"));
    s.status.elapsed_s = num(st, "elapsed_s");
    return s;
  });
}

TrialRecord record_from(const json& j) {
  return wrap([&] {
    const json& r = field(j, "record");
    TrialRecord out;
    out.agent_id = str(r, "agent_id");
    out.condition = condition_from_string(str(r, "condition"));
    out.task_type = task_type_from_string(str(r, "task_type"));
    out.target_index = static_cast<int>(integer(r, "target_index"));
    out.completed = boolean(r, "completed");
    out.completion_time = num(r, "completion_time_s");
    out.drop_count = static_cast<int>(integer(r, "drop_count"));
    out.flip_count = static_cast<int>(integer(r, "flip_count"));
    return out;
  });
}

}  // namespace

std::string encode_input(const InputMessage& m) {
  json j = header("input");
  j["t"] = m.timestamp;
  j["hand"] = std::string(to_string(m.hand));
  j["pose"] = pose(m.state.pose);
  j["twist"] = {{"v", vec(m.state.twist.v)}, {"w", vec(m.state.twist.w)}};
  j["clutch"] = m.clutch;
  return j.dump();
}

std::string encode_control(const ControlMessage& m) {
  json j = header("control");
  j["command"] = std::string(to_string(m.command));
  if (m.condition) j["condition"] = std::string(to_string(*m.condition));
  if (m.scenario) j["scenario"] = scenario_to_json(*m.scenario);
  return j.dump();
}

std::string encode_advance(const AdvanceFrame& m) {
  json j = header("advance");
  j["t"] = m.t;
  return j.dump();
}

std::string encode_snapshot(const StateSnapshot& s) {
  json j = header("snapshot");
  j["tick"] = s.tick;
  j["clock"] = s.clock;
  j["condition"] = std::string(to_string(s.condition));
  j["box"] = pose(s.box);
  json effs = json::array();
  for (int i = 0; i < 2; ++i) {
    const EffectorSnapshot& e = s.effectors[i];
    json ej = {{"hand", std::string(to_string(static_cast<Hand>(i)))},
               {"pose", pose(e.pose)},
               {"wrench", {{"f", vec(e.wrench.f)}, {"tau", vec(e.wrench.tau)}}},
               {"clutch", e.clutch}};
    if (e.target) {
      ej["target"] = pose(*e.target);
      ej["offset"] = vec(e.target->p - e.pose.p);
    }
    effs.push_back(std::move(ej));
  }
  j["effectors"] = std::move(effs);
  if (s.target) {
    j["target"] = {{"index", s.target->index},
                   {"pose", pose(s.target->pose)},
                   {"pos_tol", s.target->pos_tol},
                   {"rot_tol", s.target->rot_tol}};
  }
  j["status"] = {{"state", std::string(to_string(s.status.state))},
                 {"target_index", s.status.target_index},
                 {"target_count", s.status.target_count},
                 {"completed_count", s.status.completed_count},
                 {"elapsed_s", s.status.elapsed_s}};
  return j.dump();
}

std::string encode_record(const TrialRecord& r) {
  json j = header("record");
  j["record"] = record_json(r);
  return j.dump();
}

std::string encode_error(const ErrorFrame& e) {
  json j = header("error");
  j["code"] = e.code;
  j["message"] = e.message;
  return j.dump();
}

ClientFrame decode_client_frame(std::string_view text) {
  std::string type;
  const json j = parse_frame(text, type);
  if (type == "input") return input_from(j);
  if (type == "control") return control_from(j);
  if (type == "advance") {
    const double t = wrap([&] { return num(j, "t"); });
    return AdvanceFrame{t};
  }
  throw ProtocolError("malformed", "unknown client frame type '" + type + "'");
}

ServerFrame decode_server_frame(std::string_view text) {
  std::string type;
  const json j = parse_frame(text, type);
  if (type == "snapshot") return snapshot_from(j);
  if (type == "record") return record_from(j);
  if (type == "error") {
    return wrap([&] { return ErrorFrame{str(j, "code"), str(j, "message")}; });
  }
  throw ProtocolError("malformed", "unknown server frame type '" + type + "'");
}

InputMessage decode_input(std::string_view text) {
  auto f = decode_client_frame(text);
  if (auto* m = std::get_if<InputMessage>(&f)) return *m;
  throw ProtocolError("invalid", "expected an input frame");
}

StateSnapshot decode_snapshot(std::string_view text) {
  auto f = decode_server_frame(text);
  if (auto* s = std::get_if<StateSnapshot>(&f)) return *s;
  throw ProtocolError("invalid", "expected a snapshot frame");
}

}  // namespace teleop
