#include "teleop/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace teleop {

void RigidBody::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("RigidBody: mass must be > 0");
  if (!(inertia.array() > 0.0).all()) throw std::invalid_argument("RigidBody: inertia must be > 0");
}

Mat3 RigidBody::world_inertia() const {
  const Mat3 r = pose.rotation();
  return r * inertia.asDiagonal() * r.transpose();
}

Vec3 RigidBody::point_velocity(const Vec3& x) const { return twist.v + twist.w.cross(x - pose.p); }

double RigidBody::kinetic_energy() const {
  return 0.5 * mass * twist.v.squaredNorm() + 0.5 * twist.w.dot(world_inertia() * twist.w);
}

void ContactParams::validate() const {
  if (!(k_n > 0.0)) throw std::invalid_argument("ContactParams: k_n must be > 0");
  if (!(d_n >= 0.0)) throw std::invalid_argument("ContactParams: d_n must be >= 0");
  if (!(mu >= 0.0)) throw std::invalid_argument("ContactParams: mu must be >= 0");
  if (!(slip_epsilon > 0.0)) throw std::invalid_argument("ContactParams: slip_epsilon must be > 0");
  if (!(tangential_stiffness_ratio > 0.0)) {
    throw std::invalid_argument("ContactParams: tangential_stiffness_ratio must be > 0");
  }
}

namespace {

struct Sample {
  Vec3 point;
  Vec3 normal;  // direction of the force on body A
  double depth;
  double weight;
  int slot;
};

Vec3 velocity_at(const RigidBody* body, const Vec3& x) {
  return body ? body->point_velocity(x) : Vec3::Zero();
}

Vec3 origin_of(const RigidBody* body) { return body ? body->pose.p : Vec3::Zero(); }

// Disk rim (8 points) and centre, in a fixed order.
std::array<Vec3, kDiskSamples> disk_points(const RigidBody& body, const Disk& disk) {
  const Vec3 n = disk.normal.normalized();
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = n.cross(helper).normalized();
  const Vec3 w = n.cross(u);
  std::array<Vec3, kDiskSamples> pts;
  for (int k = 0; k < 8; ++k) {
    const double a = k * kPi / 4.0;
    pts[k] = body.pose.p + body.pose.q * (disk.radius * (std::cos(a) * u + std::sin(a) * w));
  }
  pts[8] = body.pose.p;
  return pts;
}

std::array<Vec3, kCuboidCorners> cuboid_corners(const RigidBody& body, const Cuboid& c) {
  std::array<Vec3, kCuboidCorners> pts;
  for (int k = 0; k < kCuboidCorners; ++k) {
    const Vec3 s((k & 1) ? 1.0 : -1.0, (k & 2) ? 1.0 : -1.0, (k & 4) ? 1.0 : -1.0);
    pts[k] = body.pose.p + body.pose.q * s.cwiseProduct(c.half_extents);
  }
  return pts;
}

template <std::size_t N>
void halfspace_samples(const std::array<Vec3, N>& pts, const HalfSpace& hs, double weight,
                       std::vector<Sample>& out) {
  const Vec3 n = hs.normal.normalized();
  for (std::size_t k = 0; k < N; ++k) {
    const double depth = hs.offset - n.dot(pts[k]);
    if (depth > 0.0) out.push_back({pts[k], n, depth, weight, static_cast<int>(k)});
  }
}

void disk_cuboid_samples(const RigidBody& disk_body, const Disk& disk, const RigidBody& box,
                         const Cuboid& cuboid, std::vector<Sample>& out) {
  const auto pts = disk_points(disk_body, disk);
  const Mat3 r = box.pose.rotation();
  for (int k = 0; k < kDiskSamples; ++k) {
    const Vec3 local = r.transpose() * (pts[k] - box.pose.p);
    const Vec3 room = cuboid.half_extents - local.cwiseAbs();
    if (!(room.array() > 0.0).all()) continue;
    int axis = 0;
    const double depth = room.minCoeff(&axis);
    Vec3 n_local = Vec3::Zero();
    n_local[axis] = local[axis] >= 0.0 ? 1.0 : -1.0;
    out.push_back({pts[k], r * n_local, depth, 1.0 / kDiskSamples, k});
  }
}

enum class Kind { kDisk, kCuboid, kHalfSpace };

Kind kind_of(const Shape& s) { return static_cast<Kind>(s.index()); }

}  // namespace

ContactResult contact_forces(const ShapedBody& a_in, const ShapedBody& b_in,
                             const ContactParams& params, double dt, TangentialMemory* memory) {
  // Canonical order: disk before cuboid before half-space.
  const bool swapped = kind_of(a_in.shape) > kind_of(b_in.shape);
  const ShapedBody& a = swapped ? b_in : a_in;
  const ShapedBody& b = swapped ? a_in : b_in;
  const Kind ka = kind_of(a.shape);
  const Kind kb = kind_of(b.shape);

  std::vector<Sample> samples;
  if (ka == Kind::kDisk && kb == Kind::kHalfSpace) {
    if (!a.body) throw std::invalid_argument("contact_forces: disk needs a body");
    halfspace_samples(disk_points(*a.body, std::get<Disk>(a.shape)), std::get<HalfSpace>(b.shape),
                      1.0 / kDiskSamples, samples);
  } else if (ka == Kind::kCuboid && kb == Kind::kHalfSpace) {
    if (!a.body) throw std::invalid_argument("contact_forces: cuboid needs a body");
    // Weight 1/4 per corner: a face lying flat carries k_n in total.
    halfspace_samples(cuboid_corners(*a.body, std::get<Cuboid>(a.shape)),
                      std::get<HalfSpace>(b.shape), 0.25, samples);
  } else if (ka == Kind::kDisk && kb == Kind::kCuboid) {
    if (!a.body || !b.body) throw std::invalid_argument("contact_forces: disk/cuboid need bodies");
    disk_cuboid_samples(*a.body, std::get<Disk>(a.shape), *b.body, std::get<Cuboid>(b.shape),
                        samples);
  } else {
    throw std::invalid_argument("contact_forces: unsupported shape pair");
  }

  std::array<bool, kMaxContactSamples> active{};
  ContactResult res;
  const Vec3 pa = origin_of(a.body);
  const Vec3 pb = origin_of(b.body);
  for (const Sample& s : samples) {
    active[static_cast<std::size_t>(s.slot)] = true;
    const Vec3 v_rel = velocity_at(a.body, s.point) - velocity_at(b.body, s.point);
    const double separation_rate = v_rel.dot(s.normal);
    const double kn = s.weight * params.k_n;
    const double dn = s.weight * params.d_n;
    const double fn = std::max(0.0, kn * s.depth - dn * separation_rate);

    const double kt = kn * params.tangential_stiffness_ratio;
    const double dt_damp = dn * params.tangential_stiffness_ratio;
    const Vec3 vt = v_rel - separation_rate * s.normal;
    const double slip = vt.norm();
    const double limit = params.mu * fn;

    Vec3 ext = memory ? (*memory)[static_cast<std::size_t>(s.slot)] : Vec3::Zero();
    ext -= ext.dot(s.normal) * s.normal;
    Vec3 ft = Vec3::Zero();
    if (fn <= 0.0) {
      ext.setZero();
    } else if (!memory && slip > params.slip_epsilon) {
      ft = -limit * vt / slip;
    } else {
      // Stick while the spring stays inside the cone; once it leaves, slide
      // at the Coulomb limit against the slip direction.
      ext += vt * dt;
      ft = -kt * ext - dt_damp * vt;
      const double mag = ft.norm();
      if (mag > limit) {
        ft = slip > params.slip_epsilon ? Vec3(-limit * vt / slip) : Vec3(ft * (limit / mag));
        ext = -ft / kt;
      }
    }
    if (memory) (*memory)[static_cast<std::size_t>(s.slot)] = ext;

    if (fn <= 0.0) continue;
    const Vec3 f = fn * s.normal + ft;
    res.on_a.f += f;
    res.on_a.tau += (s.point - pa).cross(f);
    res.on_b.f -= f;
    res.on_b.tau += (s.point - pb).cross(-f);
    res.normal_force += fn;
    res.points.push_back({s.point, s.normal, fn, ft});
  }
  if (memory) {
    for (std::size_t k = 0; k < memory->size(); ++k) {
      if (!active[k]) (*memory)[k].setZero();
    }
  }

  if (swapped) {
    std::swap(res.on_a, res.on_b);
    for (auto& p : res.points) {
      p.normal = -p.normal;
      p.tangential_force = -p.tangential_force;
    }
  }
  return res;
}

std::size_t WorldState::contact_pair_count() const { return 5 + 3 * walls.size(); }

std::string describe(const WorldState& w) {
  std::ostringstream os;
  os << std::setprecision(17);
  auto body = [&](const char* name, const RigidBody& b) {
    os << name << ":\n"
       << "  p: [" << b.pose.p.transpose() << "]\n"
       << "  q_wxyz: [" << b.pose.q.w() << " " << b.pose.q.vec().transpose() << "]\n"
       << "  v: [" << b.twist.v.transpose() << "]\n"
       << "  w: [" << b.twist.w.transpose() << "]\n";
  };
  os << "tick: " << w.tick << "\nclock: " << w.clock << "\ndt: " << w.dt << "\n";
  body("box", w.box);
  for (int i = 0; i < 2; ++i) {
    body(i == 0 ? "effector_left" : "effector_right", w.effectors[i].body);
    os << "  target_p: [" << w.effectors[i].target.pose.p.transpose() << "]\n"
       << "  command_f: [" << w.effectors[i].command.f.transpose() << "]\n";
  }
  return os.str();
}

namespace {

bool finite_body(const RigidBody& b) {
  return b.pose.p.allFinite() && b.pose.q.coeffs().allFinite() && b.twist.is_finite();
}

void integrate(RigidBody& b, const Wrench& w, double dt) {
  b.twist.v += dt * w.f / b.mass;
  const Mat3 inertia = b.world_inertia();
  const Vec3 gyro = b.twist.w.cross(inertia * b.twist.w);
  b.twist.w += dt * inertia.ldlt().solve(w.tau - gyro);
  b.pose.p += dt * b.twist.v;
  b.pose.q = (quat_exp(dt * b.twist.w) * b.pose.q).normalized();
}

struct PairAccumulator {
  ContactSummary& summary;
  double mu;

  void record(const ContactResult& r) {
    for (const auto& p : r.points) {
      summary.friction_cone_excess =
          std::max(summary.friction_cone_excess, p.tangential_force.norm() - mu * p.normal_force);
    }
    summary.pair_force_residual =
        std::max(summary.pair_force_residual, (r.on_a.f + r.on_b.f).cwiseAbs().maxCoeff());
  }
};

}  // namespace

void step_in_place(WorldState& w) {
  if (!(w.dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
  if (w.contact_memory.size() != w.contact_pair_count()) {
    w.contact_memory.assign(w.contact_pair_count(), TangentialMemory{});
  }

  std::array<Wrench, 2> eff_wrench{};
  Wrench box_wrench;
  if (w.has_box) box_wrench.f.z() -= w.box.mass * w.gravity;

  // Impedance law, evaluated in the current effector frame.
  for (int i = 0; i < 2; ++i) {
    Effector& e = w.effectors[i];
    const Mat3 r = e.body.pose.rotation();
    MotionState current{e.body.pose, {e.body.twist.v, r.transpose() * e.body.twist.w}};
    MotionState target{e.target.pose, {e.target.twist.v, r.transpose() * e.target.twist.w}};
    const Wrench local = impedance_wrench(current, target, e.gains);
    Wrench cmd;
    cmd.f = local.f.cwiseMax(-e.force_limit).cwiseMin(e.force_limit);
    cmd.tau = r * local.tau;
    e.command = cmd;
    eff_wrench[i] += cmd;
  }

  ContactSummary summary;
  PairAccumulator acc{summary, w.contacts.mu};
  const Cuboid box_shape{0.5 * w.box_spec.dims};
  const HalfSpace table{Vec3::UnitZ(), w.table_height};

  if (w.has_box && w.has_table) {
    const auto r = contact_forces({&w.box, box_shape}, {nullptr, table}, w.contacts, w.dt,
                                  &w.contact_memory[0]);
    box_wrench += r.on_a;
    summary.box_table_normal = r.normal_force;
    acc.record(r);
  }
  for (int i = 0; i < 2; ++i) {
    Effector& e = w.effectors[i];
    if (w.has_box) {
      const auto r = contact_forces({&e.body, e.face}, {&w.box, box_shape}, w.contacts, w.dt,
                                    &w.contact_memory[1 + i]);
      eff_wrench[i] += r.on_a;
      box_wrench += r.on_b;
      summary.effector_box_normal[i] = r.normal_force;
      acc.record(r);
    }
    if (w.has_table) {
      const auto r = contact_forces({&e.body, e.face}, {nullptr, table}, w.contacts, w.dt,
                                    &w.contact_memory[3 + i]);
      eff_wrench[i] += r.on_a;
      summary.effector_table_normal[i] = r.normal_force;
      acc.record(r);
    }
  }
  for (std::size_t j = 0; j < w.walls.size(); ++j) {
    const std::size_t base = 5 + 3 * j;
    if (w.has_box) {
      const auto r = contact_forces({&w.box, box_shape}, {nullptr, w.walls[j]}, w.contacts, w.dt,
                                    &w.contact_memory[base]);
      box_wrench += r.on_a;
      acc.record(r);
    }
    for (int i = 0; i < 2; ++i) {
      Effector& e = w.effectors[i];
      const auto r = contact_forces({&e.body, e.face}, {nullptr, w.walls[j]}, w.contacts, w.dt,
                                    &w.contact_memory[base + 1 + i]);
      eff_wrench[i] += r.on_a;
      acc.record(r);
    }
  }
  w.last_contacts = summary;

  if (w.has_box) integrate(w.box, box_wrench, w.dt);
  for (int i = 0; i < 2; ++i) integrate(w.effectors[i].body, eff_wrench[i], w.dt);

  ++w.tick;
  w.clock = static_cast<double>(w.tick) * w.dt;

  bool ok = finite_body(w.box);
  for (const auto& e : w.effectors) ok = ok && finite_body(e.body);
  if (!ok) throw SimulationFault("step: non-finite state at tick " + std::to_string(w.tick), describe(w));
}

WorldState step(const WorldState& world) {
  WorldState next = world;
  step_in_place(next);
  return next;
}

double total_energy(const WorldState& w) {
  double e = 0.0;
  if (w.has_box) {
    e += w.box.kinetic_energy() + w.box.mass * w.gravity * w.box.pose.p.z();
  }
  for (const auto& eff : w.effectors) {
    e += eff.body.kinetic_energy();
    Vec6 err;
    err << eff.target.pose.p - eff.body.pose.p,
        rotation_vector(Mat3(eff.body.pose.rotation().transpose() * eff.target.pose.rotation())).value;
    e += 0.5 * err.dot(eff.gains.stiffness_diagonal().cwiseProduct(err));
  }
  return e;
}

SqueezeHoldPrediction predict_squeeze_hold(const WorldState& w, double depth) {
  const Effector& e = w.effectors[0];
  const Vec3 normal = e.body.pose.q * e.face.normal;
  const double k_t = e.gains.translational_stiffness_along(normal);
  const double k_n = w.contacts.k_n;
  SqueezeHoldPrediction out;
  out.normal_force = depth > 0.0 ? k_t * k_n / (k_t + k_n) * depth : 0.0;
  out.friction_capacity = 2.0 * w.contacts.mu * out.normal_force;
  out.weight = w.box_spec.mass * w.gravity;
  out.held = out.normal_force > 0.0 && out.friction_capacity >= out.weight;
  return out;
}

bool squeeze_hold_check(const WorldState& world, double depth) {
  return predict_squeeze_hold(world, depth).held;
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be > 0");
  contact.validate();
  if (!(effector_mass > 0.0) || !(effector_inertia > 0.0)) {
    throw std::invalid_argument("SimConfig: effector mass and inertia must be > 0");
  }
  if (!(face_radius > 0.0)) throw std::invalid_argument("SimConfig: face_radius must be > 0");
  if (!(force_limit > 0.0)) throw std::invalid_argument("SimConfig: force_limit must be > 0");
}

Pose SimConfig::home_pose(int i) const {
  const double side = i == 0 ? 1.0 : -1.0;
  const double y = side * (0.5 * base_spacing - home_inset);
  // Pad normal (body z) points across the table towards the other arm.
  return {Vec3(home_x, y, table_height + home_height), rot_x(side * 0.5 * kPi)};
}

std::optional<WorkspaceClamp> SimConfig::workspace_clamp() const {
  if (!clamp_enabled) return std::nullopt;
  return clamp;
}

Pose resting_box_pose(const SimConfig& config, const BoxSpec& box, double x, double y, double yaw) {
  return {Vec3(x, y, config.table_height + 0.5 * box.dims.z()),
          Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()))};
}

WorldState make_world(const SimConfig& config, const BoxSpec& box) {
  config.validate();
  box.validate();
  WorldState w;
  w.dt = config.dt;
  w.gravity = config.gravity;
  w.table_height = config.table_height;
  w.contacts = config.contact;
  w.box_spec = box;
  w.box.mass = box.mass;
  const Vec3& d = box.dims;
  w.box.inertia = box.mass / 12.0 *
                  Vec3(d.y() * d.y() + d.z() * d.z(), d.x() * d.x() + d.z() * d.z(),
                       d.x() * d.x() + d.y() * d.y());
  w.box.pose = resting_box_pose(config, box, config.box_start.x(), config.box_start.y(),
                                config.box_start_yaw);

  const auto gains =
      ImpedanceGains::with_damping_ratio(config.translational_stiffness, config.rotational_stiffness,
                                         config.effector_mass, config.effector_inertia,
                                         config.damping_ratio);
  for (int i = 0; i < 2; ++i) {
    Effector& e = w.effectors[i];
    e.body.mass = config.effector_mass;
    e.body.inertia = Vec3::Constant(config.effector_inertia);
    e.body.pose = config.home_pose(i);
    e.face = Disk{config.face_radius, Vec3::UnitZ()};
    e.target.pose = e.body.pose;
    e.gains = gains;
    e.force_limit = config.force_limit;
  }
  w.contact_memory.assign(w.contact_pair_count(), TangentialMemory{});
  return w;
}

}  // namespace teleop
