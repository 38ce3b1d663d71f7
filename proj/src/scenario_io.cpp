#include "teleop/scenario_io.hpp"

#include <fstream>
#include <stdexcept>

namespace teleop {

using nlohmann::json;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument(std::string(what) + ": expected [x, y, z]");
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number()) throw std::invalid_argument(std::string(what) + ": expected numbers");
    v[k] = j[k].get<double>();
  }
  return v;
}

Quat quat_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 4) {
    throw std::invalid_argument(std::string(what) + ": expected [w, x, y, z]");
  }
  for (const auto& c : j) {
    if (!c.is_number()) throw std::invalid_argument(std::string(what) + ": expected numbers");
  }
  Quat q(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
  const double n = q.norm();
  if (!(std::abs(n - 1.0) < 1e-6)) throw std::invalid_argument(std::string(what) + ": not a unit quaternion");
  return q;
}

double number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw std::invalid_argument(std::string(key) + ": expected a number");
  return obj[key].get<double>();
}

template <class T>
T required(const json& obj, const char* key) {
  if (!obj.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
  try {
    return obj[key].get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

json scenario_to_json(const Scenario& s) {
  json targets = json::array();
  for (const auto& t : s.targets) {
    targets.push_back({{"position", vec_json(t.pose.p)},
                       {"orientation_wxyz", json::array({t.pose.q.w(), t.pose.q.x(), t.pose.q.y(), t.pose.q.z()})},
                       {"pos_tol", t.pos_tol},
                       {"rot_tol", t.rot_tol}});
  }
  return {{"task_type", std::string(to_string(s.task_type))},
          {"seed", s.seed},
          {"box", {{"dims", vec_json(s.box.dims)}, {"mass", s.box.mass}, {"yaw_symmetry", s.box.yaw_symmetry}}},
          {"targets", targets}};
}

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("scenario: expected an object");
  Scenario s;
  s.task_type = task_type_from_string(required<std::string>(j, "task_type"));
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0)) {
      throw std::invalid_argument("seed: expected a non-negative integer");
    }
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("box")) {
    const json& b = j["box"];
    if (!b.is_object()) throw std::invalid_argument("box: expected an object");
    if (b.contains("dims")) s.box.dims = vec_from(b["dims"], "box.dims");
    s.box.mass = number(b, "mass", s.box.mass);
    if (b.contains("yaw_symmetry")) {
      if (!b["yaw_symmetry"].is_boolean()) throw std::invalid_argument("box.yaw_symmetry: expected a boolean");
      s.box.yaw_symmetry = b["yaw_symmetry"].get<bool>();
    }
  }
  s.box.validate();
  const json& targets = j.contains("targets") ? j["targets"] : json::array();
  if (!targets.is_array()) throw std::invalid_argument("targets: expected an array");
  for (const auto& tj : targets) {
    if (!tj.is_object()) throw std::invalid_argument("targets: expected objects");
    TargetSpec t;
    if (!tj.contains("position")) throw std::invalid_argument("target: missing 'position'");
    t.pose.p = vec_from(tj["position"], "target.position");
    if (tj.contains("orientation_wxyz")) {
      t.pose.q = quat_from(tj["orientation_wxyz"], "target.orientation_wxyz");
    } else if (tj.contains("yaw")) {
      t.pose.q = Quat(rot_z(number(tj, "yaw", 0.0)));
    }
    t.pos_tol = number(tj, "pos_tol", t.pos_tol);
    t.rot_tol = number(tj, "rot_tol", t.rot_tol);
    t.validate();
    s.targets.push_back(t);
  }
  return s;
}

json scenario_file_to_json(const ScenarioFile& f) {
  json j = scenario_to_json(f.scenario);
  const SimConfig& c = f.session.sim;
  j["world"] = {
      {"dt", c.dt},
      {"gravity", c.gravity},
      {"table_height", c.table_height},
      {"contact",
       {{"k_n", c.contact.k_n},
        {"d_n", c.contact.d_n},
        {"mu", c.contact.mu},
        {"slip_epsilon", c.contact.slip_epsilon},
        {"tangential_stiffness_ratio", c.contact.tangential_stiffness_ratio}}},
      {"effector",
       {{"mass", c.effector_mass},
        {"inertia", c.effector_inertia},
        {"face_radius", c.face_radius},
        {"force_limit", c.force_limit},
        {"translational_stiffness", c.translational_stiffness},
        {"rotational_stiffness", c.rotational_stiffness},
        {"damping_ratio", c.damping_ratio}}},
      {"box_start", {c.box_start.x(), c.box_start.y()}},
      {"box_start_yaw", c.box_start_yaw},
      {"workspace_clamp", c.clamp_enabled ? json{{"min", vec_json(c.clamp.min)}, {"max", vec_json(c.clamp.max)}}
                                          : json(nullptr)},
  };
  j["session"] = {{"timeout_s", f.session.timeout_s},
                  {"agent_id", f.session.agent_id},
                  {"start_jitter_position", f.session.start_jitter_position},
                  {"start_jitter_yaw", f.session.start_jitter_yaw}};
  return j;
}

ScenarioFile scenario_file_from_json(const json& j) {
  ScenarioFile f;
  f.scenario = scenario_from_json(j);
  SimConfig& c = f.session.sim;
  if (j.contains("world")) {
    const json& w = j["world"];
    if (!w.is_object()) throw std::invalid_argument("world: expected an object");
    c.dt = number(w, "dt", c.dt);
    c.gravity = number(w, "gravity", c.gravity);
    c.table_height = number(w, "table_height", c.table_height);
    if (w.contains("contact")) {
      const json& k = w["contact"];
      c.contact.k_n = number(k, "k_n", c.contact.k_n);
      c.contact.d_n = number(k, "d_n", c.contact.d_n);
      c.contact.mu = number(k, "mu", c.contact.mu);
      c.contact.slip_epsilon = number(k, "slip_epsilon", c.contact.slip_epsilon);
      c.contact.tangential_stiffness_ratio =
          number(k, "tangential_stiffness_ratio", c.contact.tangential_stiffness_ratio);
    }
    if (w.contains("effector")) {
      const json& e = w["effector"];
      c.effector_mass = number(e, "mass", c.effector_mass);
      c.effector_inertia = number(e, "inertia", c.effector_inertia);
      c.face_radius = number(e, "face_radius", c.face_radius);
      c.force_limit = number(e, "force_limit", c.force_limit);
      c.translational_stiffness = number(e, "translational_stiffness", c.translational_stiffness);
      c.rotational_stiffness = number(e, "rotational_stiffness", c.rotational_stiffness);
      c.damping_ratio = number(e, "damping_ratio", c.damping_ratio);
    }
    if (w.contains("box_start")) {
      const json& b = w["box_start"];
      if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
        throw std::invalid_argument("world.box_start: expected [x, y]");
      }
      c.box_start = Vec3(b[0].get<double>(), b[1].get<double>(), 0.0);
    }
    c.box_start_yaw = number(w, "box_start_yaw", c.box_start_yaw);
    if (w.contains("workspace_clamp")) {
      const json& wc = w["workspace_clamp"];
      if (wc.is_null()) {
        c.clamp_enabled = false;
      } else {
        c.clamp_enabled = true;
        c.clamp.min = vec_from(wc.at("min"), "workspace_clamp.min");
        c.clamp.max = vec_from(wc.at("max"), "workspace_clamp.max");
      }
    }
  }
  c.validate();
  if (j.contains("session")) {
    const json& s = j["session"];
    if (!s.is_object()) throw std::invalid_argument("session: expected an object");
    f.session.timeout_s = number(s, "timeout_s", f.session.timeout_s);
    if (s.contains("agent_id")) f.session.agent_id = required<std::string>(s, "agent_id");
    f.session.start_jitter_position = number(s, "start_jitter_position", f.session.start_jitter_position);
    f.session.start_jitter_yaw = number(s, "start_jitter_yaw", f.session.start_jitter_yaw);
  }
  if (!(f.session.timeout_s > 0.0)) throw std::invalid_argument("session.timeout_s must be > 0");
  return f;
}

ScenarioFile load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return scenario_file_from_json(j);
}

void save_scenario_file(const ScenarioFile& file, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << scenario_file_to_json(file).dump(2) << '\n';
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

}  // namespace teleop
