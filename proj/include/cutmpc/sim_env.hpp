#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutmpc/types.hpp"

namespace cutmpc {

// Parametric synthetic material a knife can cut through.
struct ObjectClass {
  std::string name;
  double surface_z = 0.05;    // m, top of the material
  double table_z = 0.0;       // m, cutting board
  double k0 = 500.0;          // N/m, base stiffness
  double k_grad = 0.0;        // N/m^2, stiffness growth with depth
  double mu_static = 0.6;     // -
  double mu_kinetic = 0.4;    // -
  double alpha_saw = 20.0;    // s/m, saw-weakening coefficient
  double stick_vel_eps = 1e-4;  // m/s, re-stick threshold
  double noise_sigma = 0.02;  // N, force measurement noise std
  // Cut-front progression: front_rate = base_rate + saw_gain * |v_y| while penetrating.
  double cut_base_rate = 2e-3;   // m/s per m of penetration drive (see step_plant)
  double cut_saw_gain = 0.5;     // -, extra advance per unit sawing speed
  bool seen = true;

  void validate() const {
    if (!(surface_z > table_z)) throw std::invalid_argument("ObjectClass: surface_z must exceed table_z");
    if (!(k0 > 0.0)) throw std::invalid_argument("ObjectClass: k0 must be positive");
    if (!(mu_static >= mu_kinetic && mu_kinetic >= 0.0))
      throw std::invalid_argument("ObjectClass: need mu_static >= mu_kinetic >= 0");
    if (alpha_saw < 0.0) throw std::invalid_argument("ObjectClass: alpha_saw must be >= 0");
    if (noise_sigma < 0.0) throw std::invalid_argument("ObjectClass: noise_sigma must be >= 0");
  }
};

struct PlantState {
  Vec3 p = Vec3::Zero();      // m, knife tip
  double cut_front_z = 0.0;   // m, depth to which material is severed
  bool sticking = false;
  double t = 0.0;             // s
};

inline PlantState initial_state(const ObjectClass& cls, const Vec3& start) {
  PlantState s;
  s.p = start;
  s.cut_front_z = cls.surface_z;
  s.sticking = false;
  s.t = 0.0;
  return s;
}

// Nominal compliance used to convert a lateral velocity command into the
// drive-force proxy that works against static friction. Matches the
// controller gain used online so that stick release happens near
// |f_r,y| > mu_static * N.
inline constexpr double kLateralDriveCompliance = 0.003;  // (m/s)/N

// Penetration resistance with depth-graded stiffness and saw weakening. Once
// the cut front reaches the board the cut plane is fully severed and the
// halves no longer resist the blade.
inline double contact_normal(const ObjectClass& cls, const PlantState& state, double saw_speed) {
  if (state.cut_front_z <= cls.table_z) return 0.0;
  double pen = std::max(0.0, state.cut_front_z - state.p.z());
  if (pen <= 0.0) return 0.0;
  double depth = std::max(0.0, cls.surface_z - state.p.z());
  double k = cls.k0 + cls.k_grad * depth;
  return k * pen / (1.0 + cls.alpha_saw * saw_speed);
}

// Advance the plant by one tick under velocity command u. Returns the new
// state and the measured force (object-on-knife, so the normal force is +Z).
inline std::pair<PlantState, Vec3> step_plant(const PlantState& state, const Vec3& u,
                                              const ObjectClass& cls, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_plant: dt must be positive");
  if (!u.allFinite()) throw std::invalid_argument("step_plant: non-finite velocity command");

  PlantState next = state;
  next.t = state.t + dt;

  double pen = std::max(0.0, state.cut_front_z - state.p.z());
  bool in_contact = pen > 0.0 || state.p.z() <= cls.surface_z;

  // Lateral stick-slip. The drive proxy is the force an admittance-controlled
  // arm applies when commanding u_y against a fixed contact.
  double drive_y = std::abs(u.y()) / kLateralDriveCompliance;
  double v_y = u.y();
  bool sticking = state.sticking;
  double normal = 0.0;
  if (in_contact && pen > 0.0) {
    if (sticking) {
      double limit = cls.mu_static * contact_normal(cls, state, 0.0);
      if (drive_y > limit) sticking = false;  // breakaway
    } else if (std::abs(u.y()) <= cls.stick_vel_eps) {
      sticking = true;
    }
    if (sticking) v_y = 0.0;
    normal = contact_normal(cls, state, std::abs(v_y));
  } else {
    sticking = false;
  }

  // Kinematics. X and Z integrate the command; Y freezes while stuck.
  next.p.x() = state.p.x() + u.x() * dt;
  next.p.y() = state.p.y() + v_y * dt;
  next.p.z() = state.p.z() + u.z() * dt;
  next.sticking = sticking;

  // Cut front creeps toward the knife while penetrating, faster when sawing.
  if (pen > 0.0) {
    double rate = cls.cut_base_rate + cls.cut_saw_gain * std::abs(v_y);
    double front = state.cut_front_z - rate * dt;
    front = std::max(front, next.p.z());
    front = std::max(front, cls.table_z);
    next.cut_front_z = std::min(front, state.cut_front_z);
  }

  Vec3 f = Vec3::Zero();
  if (pen > 0.0) {
    f.z() = normal;
    if (sticking) {
      double mag = std::min(drive_y, cls.mu_static * normal);
      f.y() = (u.y() >= 0.0 ? -1.0 : 1.0) * mag;
      if (u.y() == 0.0) f.y() = 0.0;
    } else {
      f.y() = (v_y >= 0.0 ? -1.0 : 1.0) * cls.mu_kinetic * normal;
      if (v_y == 0.0) f.y() = 0.0;
    }
  }
  if (cls.noise_sigma > 0.0) {
    std::normal_distribution<double> n(0.0, cls.noise_sigma);
    f.x() += n(rng);
    f.y() += n(rng);
    f.z() += n(rng);
  }
  return {next, f};
}

inline bool is_success(const PlantState& state, const ObjectClass& cls, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("is_success: tol must be positive");
  return state.p.z() <= cls.table_z + tol;
}

// Nine synthetic classes spanning soft to stiff, 6 seen / 3 unseen. The
// unseen ones sit inside the seen parameter ranges on some axes and outside
// on others.
inline std::vector<ObjectClass> make_class_library(std::uint64_t seed = 0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  auto j = [&](double v) { return v * (1.0 + jitter(rng)); };

  std::vector<ObjectClass> lib;
  auto add = [&](const std::string& name, double height, double k0, double k_grad, double mu_s,
                 double mu_k, double alpha, double base_rate, double saw_gain, bool seen) {
    ObjectClass c;
    c.name = name;
    c.surface_z = height;
    c.table_z = 0.0;
    c.k0 = j(k0);
    c.k_grad = j(k_grad);
    c.mu_static = j(mu_s);
    c.mu_kinetic = std::min(j(mu_k), c.mu_static);
    c.alpha_saw = j(alpha);
    c.cut_base_rate = j(base_rate);
    c.cut_saw_gain = j(saw_gain);
    c.noise_sigma = 0.3;
    c.seen = seen;
    c.validate();
    lib.push_back(c);
  };

  // Seen classes, soft -> stiff. Friction is high enough that lateral motion
  // inside a block depends on the contact state, not just the commanded force.
  // Soft items are thin slabs; stiff ones are taller, so a stiff cut has to
  // cover more depth and lean harder on lateral (sawing) motion.
  add("sponge",  0.015,  300.0,  2000.0, 0.60, 0.40, 10.0, 9e-3, 0.02, true);
  add("custard", 0.025,  500.0,  4000.0, 0.70, 0.50, 12.0, 8e-3, 0.30, true);
  add("loaf",    0.035,  900.0,  8000.0, 0.90, 0.60, 16.0, 5e-3, 0.40, true);
  add("gourd",   0.040, 1600.0, 15000.0, 1.10, 0.76, 22.0, 2.5e-3, 0.55, true);
  add("tuber",   0.040, 2400.0, 25000.0, 1.30, 0.90, 28.0, 1.2e-3, 0.70, true);
  add("rind",    0.045, 3500.0, 40000.0, 1.50, 1.10, 35.0, 0.6e-3, 0.85, true);
  // Unseen: stiffness inside the seen hull, friction/saw response outside.
  add("curd",    0.030,  700.0,  6000.0, 1.50, 1.20, 14.0, 6e-3, 0.35, false);
  add("marrow",  0.040, 2000.0, 20000.0, 0.50, 0.30, 45.0, 1.8e-3, 0.60, false);
  add("crust",   0.045, 4200.0, 30000.0, 1.40, 1.00, 30.0, 0.9e-3, 0.80, false);
  return lib;
}

// --- key=value serialization, one [section] per class ---

inline void save_class_library(const std::vector<ObjectClass>& lib, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_class_library: cannot open " + path);
  out.precision(17);
  for (const auto& c : lib) {
    out << "[" << c.name << "]\n";
    out << "surface_z=" << c.surface_z << "\n";
    out << "table_z=" << c.table_z << "\n";
    out << "k0=" << c.k0 << "\n";
    out << "k_grad=" << c.k_grad << "\n";
    out << "mu_static=" << c.mu_static << "\n";
    out << "mu_kinetic=" << c.mu_kinetic << "\n";
    out << "alpha_saw=" << c.alpha_saw << "\n";
    out << "stick_vel_eps=" << c.stick_vel_eps << "\n";
    out << "noise_sigma=" << c.noise_sigma << "\n";
    out << "cut_base_rate=" << c.cut_base_rate << "\n";
    out << "cut_saw_gain=" << c.cut_saw_gain << "\n";
    out << "seen=" << (c.seen ? 1 : 0) << "\n\n";
  }
}

inline std::vector<ObjectClass> load_class_library(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_class_library: cannot open " + path);
  std::vector<ObjectClass> lib;
  ObjectClass cur;
  bool have = false;
  std::string line;
  auto flush = [&]() {
    if (have) {
      cur.validate();
      lib.push_back(cur);
    }
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      flush();
      cur = ObjectClass{};
      cur.name = line.substr(1, line.size() - 2);
      have = true;
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos || !have)
      throw std::runtime_error("load_class_library: malformed line: " + line);
    std::string key = line.substr(0, eq);
    double val = std::stod(line.substr(eq + 1));
    if (key == "surface_z") cur.surface_z = val;
    else if (key == "table_z") cur.table_z = val;
    else if (key == "k0") cur.k0 = val;
    else if (key == "k_grad") cur.k_grad = val;
    else if (key == "mu_static") cur.mu_static = val;
    else if (key == "mu_kinetic") cur.mu_kinetic = val;
    else if (key == "alpha_saw") cur.alpha_saw = val;
    else if (key == "stick_vel_eps") cur.stick_vel_eps = val;
    else if (key == "noise_sigma") cur.noise_sigma = val;
    else if (key == "cut_base_rate") cur.cut_base_rate = val;
    else if (key == "cut_saw_gain") cur.cut_saw_gain = val;
    else if (key == "seen") cur.seen = val != 0.0;
    else throw std::runtime_error("load_class_library: unknown key: " + key);
  }
  flush();
  return lib;
}

}  // namespace cutmpc
