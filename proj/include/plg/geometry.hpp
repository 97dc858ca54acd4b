#pragma once

// Point cloud types, synthetic desk-object generation and cloud text I/O.
// All clouds live in a table frame: the table plane is z = 0 and +z points up.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace plg {

using Vec3 = Eigen::Vector3d;

// Raised for malformed user input (bad specs, unreadable files, ...).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when probabilistic inference cannot produce an answer.
struct InferenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PartLabel { top, middle, bottom, handle, usable_area };

inline const char* to_string(PartLabel l) {
  switch (l) {
    case PartLabel::top: return "top";
    case PartLabel::middle: return "middle";
    case PartLabel::bottom: return "bottom";
    case PartLabel::handle: return "handle";
    case PartLabel::usable_area: return "usable_area";
  }
  return "?";
}

inline std::optional<PartLabel> part_label_from(const std::string& s) {
  if (s == "top") return PartLabel::top;
  if (s == "middle") return PartLabel::middle;
  if (s == "bottom") return PartLabel::bottom;
  if (s == "handle") return PartLabel::handle;
  if (s == "usable_area") return PartLabel::usable_area;
  return std::nullopt;
}

enum class Category {
  pan, pot, cup, glass, bowl, bottle, can,
  hammer, knife, screwdriver, cooking_tool
};

inline constexpr int kNumCategories = 11;

inline const std::vector<Category>& all_categories() {
  static const std::vector<Category> cats = {
      Category::pan, Category::pot, Category::cup, Category::glass,
      Category::bowl, Category::bottle, Category::can, Category::hammer,
      Category::knife, Category::screwdriver, Category::cooking_tool};
  return cats;
}

inline const char* to_string(Category c) {
  switch (c) {
    case Category::pan: return "pan";
    case Category::pot: return "pot";
    case Category::cup: return "cup";
    case Category::glass: return "glass";
    case Category::bowl: return "bowl";
    case Category::bottle: return "bottle";
    case Category::can: return "can";
    case Category::hammer: return "hammer";
    case Category::knife: return "knife";
    case Category::screwdriver: return "screwdriver";
    case Category::cooking_tool: return "cooking_tool";
  }
  return "?";
}

inline std::optional<Category> category_from(const std::string& s) {
  for (Category c : all_categories())
    if (s == to_string(c)) return c;
  return std::nullopt;
}

inline bool is_tool_category(Category c) {
  return c == Category::hammer || c == Category::knife ||
         c == Category::screwdriver || c == Category::cooking_tool;
}

enum class Pose { upright, sideways, upsidedown };

inline const char* to_string(Pose p) {
  switch (p) {
    case Pose::upright: return "upright";
    case Pose::sideways: return "sideways";
    case Pose::upsidedown: return "upsidedown";
  }
  return "?";
}

inline std::optional<Pose> pose_from(const std::string& s) {
  if (s == "upright") return Pose::upright;
  if (s == "sideways") return Pose::sideways;
  if (s == "upsidedown") return Pose::upsidedown;
  return std::nullopt;
}

enum class Containment { empty, full };

inline const char* to_string(Containment c) {
  return c == Containment::empty ? "empty" : "full";
}

struct Point {
  Vec3 p = Vec3::Zero();
  Vec3 n = Vec3::UnitZ();
  // Ground-truth part label, only set for synthetic clouds.
  std::optional<PartLabel> gt_part;
};

struct TableFrame {
  Vec3 origin = Vec3::Zero();
  Vec3 up = Vec3::UnitZ();
};

struct CloudMeta {
  std::string id = "object";
  std::optional<Category> category;
  std::optional<Pose> pose;
  std::optional<Containment> contains;
};

struct PointCloud {
  std::vector<Point> pts;
  TableFrame table;
  CloudMeta meta;

  std::size_t size() const { return pts.size(); }
  bool empty() const { return pts.empty(); }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& q : pts) c += q.p;
    return pts.empty() ? c : Vec3(c / double(pts.size()));
  }
};

struct SyntheticSpec {
  Category category = Category::cup;
  // Canonical bounding dimensions (x, y, z) in metres, before posing.
  Vec3 dims = Vec3(0.08, 0.08, 0.10);
  Pose pose = Pose::upright;
  int handle_count = 0;
  Containment contains = Containment::empty;
  double noise_sigma = 0.0;
  // When set, only points facing the camera survive (positive dot of the
  // outward normal with the direction from object towards the camera).
  std::optional<Vec3> view_dir;
  double pitch = 0.005;
};

// Template defaults so callers can say default_spec(Category::cup) and tweak.
inline SyntheticSpec default_spec(Category c) {
  SyntheticSpec s;
  s.category = c;
  switch (c) {
    case Category::glass: s.dims = {0.075, 0.075, 0.12}; break;
    case Category::can: s.dims = {0.066, 0.066, 0.115}; break;
    case Category::bottle: s.dims = {0.07, 0.07, 0.24}; break;
    case Category::cup: s.dims = {0.085, 0.085, 0.10}; s.handle_count = 1; break;
    case Category::bowl: s.dims = {0.16, 0.16, 0.07}; break;
    case Category::pot: s.dims = {0.18, 0.18, 0.12}; s.handle_count = 2; break;
    case Category::pan: s.dims = {0.22, 0.22, 0.045}; s.handle_count = 1; break;
    case Category::hammer: s.dims = {0.045, 0.032, 0.30}; s.pose = Pose::sideways; break;
    case Category::knife: s.dims = {0.035, 0.02, 0.24}; s.pose = Pose::sideways; break;
    case Category::screwdriver: s.dims = {0.03, 0.03, 0.22}; s.pose = Pose::sideways; break;
    case Category::cooking_tool: s.dims = {0.045, 0.025, 0.30}; s.pose = Pose::sideways; break;
  }
  return s;
}

namespace detail {

// A triangle of the template mesh. comp tags which object component the
// triangle belongs to (0 = body, 1 = handle, 2 = head/usable area).
// nk selects how analytic normals are computed at sampled locations.
enum class NormalKind { facet, radial, sphere, fixed_dir, torus };

struct Tri {
  Vec3 a, b, c;
  int comp = 0;
  NormalKind nk = NormalKind::facet;
  Vec3 q0 = Vec3::Zero();   // axis point / sphere centre / fixed direction
  Vec3 q1 = Vec3::UnitZ();  // axis direction (radial, torus)
  double major = 0.0;       // torus major radius
  double sign = 1.0;        // +1 outward, -1 for inner shells
};

inline Vec3 facet_normal(const Tri& t) {
  Vec3 n = (t.b - t.a).cross(t.c - t.a);
  double len = n.norm();
  return len > 0 ? Vec3(n / len) : Vec3::UnitZ();
}

inline Vec3 analytic_normal(const Tri& t, const Vec3& p) {
  switch (t.nk) {
    case NormalKind::facet:
      return t.sign * facet_normal(t);
    case NormalKind::radial: {
      Vec3 d = p - t.q0;
      d -= d.dot(t.q1) * t.q1;
      double len = d.norm();
      return len > 1e-12 ? Vec3(t.sign * d / len) : Vec3(t.sign * Vec3::UnitX());
    }
    case NormalKind::sphere: {
      Vec3 d = p - t.q0;
      double len = d.norm();
      return len > 1e-12 ? Vec3(t.sign * d / len) : Vec3(t.sign * Vec3::UnitZ());
    }
    case NormalKind::fixed_dir:
      return t.sign * t.q0;
    case NormalKind::torus: {
      Vec3 d = p - t.q0;
      Vec3 in_plane = d - d.dot(t.q1) * t.q1;
      double len = in_plane.norm();
      Vec3 ring = t.q0 + (len > 1e-12 ? Vec3(in_plane * (t.major / len)) : Vec3::Zero());
      Vec3 n = p - ring;
      double nl = n.norm();
      return nl > 1e-12 ? Vec3(t.sign * n / nl) : Vec3(t.sign * t.q1);
    }
  }
  return Vec3::UnitZ();
}

class MeshBuilder {
 public:
  // quad_ controls the initial facet size; primitives aim for roughly square
  // quads of this edge length so that midpoint subdivision stays shallow and
  // the sampled density is close to one point per pitch cell.
  explicit MeshBuilder(double quad_edge) : quad_(quad_edge) {}

  std::vector<Tri> tris;

  void tri(const Vec3& a, const Vec3& b, const Vec3& c, const Tri& proto) {
    Tri t = proto;
    t.a = a; t.b = b; t.c = c;
    tris.push_back(t);
  }

  void quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
            const Tri& proto) {
    tri(a, b, c, proto);
    tri(a, c, d, proto);
  }

  // Open cylinder side wall around a vertical axis through (cx, cy).
  void cylinder_side(double cx, double cy, double r, double z0, double z1,
                     int comp, double sign) {
    Tri proto;
    proto.comp = comp;
    proto.nk = NormalKind::radial;
    proto.q0 = Vec3(cx, cy, 0);
    proto.q1 = Vec3::UnitZ();
    proto.sign = sign;
    int seg = segments(2 * M_PI * r);
    int rows = segments(z1 - z0);
    for (int j = 0; j < rows; ++j) {
      double za = z0 + (z1 - z0) * j / rows;
      double zb = z0 + (z1 - z0) * (j + 1) / rows;
      for (int i = 0; i < seg; ++i) {
        double a0 = 2 * M_PI * i / seg, a1 = 2 * M_PI * (i + 1) / seg;
        Vec3 p00(cx + r * std::cos(a0), cy + r * std::sin(a0), za);
        Vec3 p10(cx + r * std::cos(a1), cy + r * std::sin(a1), za);
        Vec3 p11(cx + r * std::cos(a1), cy + r * std::sin(a1), zb);
        Vec3 p01(cx + r * std::cos(a0), cy + r * std::sin(a0), zb);
        quad(p00, p10, p11, p01, proto);
      }
    }
  }

  // Flat annulus (disc when r0 == 0) at height z with the given normal sign.
  void annulus(double cx, double cy, double r0, double r1, double z,
               double nsign, int comp) {
    Tri proto;
    proto.comp = comp;
    proto.nk = NormalKind::fixed_dir;
    proto.q0 = Vec3(0, 0, nsign);
    proto.sign = 1.0;
    int rings = segments(r1 - r0);
    for (int j = 0; j < rings; ++j) {
      double ra = r0 + (r1 - r0) * j / rings;
      double rb = r0 + (r1 - r0) * (j + 1) / rings;
      int seg = segments(2 * M_PI * std::max(rb, 0.5 * (ra + rb)));
      for (int i = 0; i < seg; ++i) {
        double a0 = 2 * M_PI * i / seg, a1 = 2 * M_PI * (i + 1) / seg;
        Vec3 i0(cx + ra * std::cos(a0), cy + ra * std::sin(a0), z);
        Vec3 i1(cx + ra * std::cos(a1), cy + ra * std::sin(a1), z);
        Vec3 o0(cx + rb * std::cos(a0), cy + rb * std::sin(a0), z);
        Vec3 o1(cx + rb * std::cos(a1), cy + rb * std::sin(a1), z);
        if (ra > 1e-9) quad(i0, o0, o1, i1, proto);
        else tri(Vec3(cx, cy, z), o0, o1, proto);
      }
    }
  }

  // Spherical band between polar angles phi0..phi1 measured from the
  // downward axis of a sphere centred at (cx, cy, cz).
  void sphere_band(double cx, double cy, double cz, double r, double phi0,
                   double phi1, int comp, double sign) {
    Tri proto;
    proto.comp = comp;
    proto.nk = NormalKind::sphere;
    proto.q0 = Vec3(cx, cy, cz);
    proto.sign = sign;
    int rings = segments(r * (phi1 - phi0));
    for (int j = 0; j < rings; ++j) {
      double f0 = phi0 + (phi1 - phi0) * j / rings;
      double f1 = phi0 + (phi1 - phi0) * (j + 1) / rings;
      int seg = segments(2 * M_PI * r * std::sin(std::max(f0, f1)));
      auto at = [&](double phi, double th) {
        return Vec3(cx + r * std::sin(phi) * std::cos(th),
                    cy + r * std::sin(phi) * std::sin(th),
                    cz - r * std::cos(phi));
      };
      for (int i = 0; i < seg; ++i) {
        double a0 = 2 * M_PI * i / seg, a1 = 2 * M_PI * (i + 1) / seg;
        if (f0 < 1e-9) tri(at(0, a0), at(f1, a0), at(f1, a1), proto);
        else quad(at(f0, a0), at(f0, a1), at(f1, a1), at(f1, a0), proto);
      }
    }
  }

  // Partial torus. centre c, ring axis (unit), major radius R, tube radius rt,
  // ring angle range [t0, t1]; the tube circle is sampled fully.
  void torus_arc(const Vec3& c, const Vec3& axis, const Vec3& ref,
                 double R, double rt, double t0, double t1, int comp) {
    Tri proto;
    proto.comp = comp;
    proto.nk = NormalKind::torus;
    proto.q0 = c;
    proto.q1 = axis;
    proto.major = R;
    Vec3 e1 = ref.normalized();
    Vec3 e2 = axis.cross(e1).normalized();
    auto at = [&](double t, double u) {
      Vec3 ring = c + R * (std::cos(t) * e1 + std::sin(t) * e2);
      Vec3 out = (std::cos(t) * e1 + std::sin(t) * e2);
      return Vec3(ring + rt * (std::cos(u) * out + std::sin(u) * axis));
    };
    int seg_ring = segments((R + rt) * (t1 - t0));
    int seg_tube = segments(2 * M_PI * rt);
    for (int i = 0; i < seg_ring; ++i) {
      double a0 = t0 + (t1 - t0) * i / seg_ring;
      double a1 = t0 + (t1 - t0) * (i + 1) / seg_ring;
      for (int j = 0; j < seg_tube; ++j) {
        double u0 = 2 * M_PI * j / seg_tube, u1 = 2 * M_PI * (j + 1) / seg_tube;
        quad(at(a0, u0), at(a1, u0), at(a1, u1), at(a0, u1), proto);
      }
    }
  }

  // Axis-aligned box given min/max corners; facet normals.
  void box(const Vec3& lo, const Vec3& hi, int comp) {
    Tri proto;
    proto.comp = comp;
    proto.nk = NormalKind::facet;
    Vec3 d = hi - lo;
    auto face = [&](const Vec3& origin, const Vec3& eu, const Vec3& ev) {
      int nu = segments(eu.norm()), nv = segments(ev.norm());
      for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
          Vec3 p = origin + eu * (double(i) / nu) + ev * (double(j) / nv);
          quad(p, p + eu / nu, p + eu / nu + ev / nv, p + ev / nv, proto);
        }
    };
    Vec3 x(d.x(), 0, 0), y(0, d.y(), 0), z(0, 0, d.z());
    face(lo, y, x);                  // bottom, normal -z
    face(lo + z, x, y);              // top, +z
    face(lo, x, z);                  // front, -y
    face(lo + y, z, x);              // back, +y
    face(lo, z, y);                  // left, -x
    face(lo + x, y, z);              // right, +x
  }

 private:
  int segments(double len) const {
    return std::max(1, int(std::ceil(len / quad_)));
  }

  double quad_;
};

inline void subdivide(std::vector<Tri>& tris, double max_edge) {
  std::vector<Tri> out;
  std::vector<Tri> stack = tris;
  while (!stack.empty()) {
    Tri t = stack.back();
    stack.pop_back();
    double e0 = (t.b - t.a).norm(), e1 = (t.c - t.b).norm(),
           e2 = (t.a - t.c).norm();
    if (std::max({e0, e1, e2}) <= max_edge) {
      out.push_back(t);
      continue;
    }
    Vec3 ab = 0.5 * (t.a + t.b), bc = 0.5 * (t.b + t.c), ca = 0.5 * (t.c + t.a);
    Tri s = t;
    s.a = t.a; s.b = ab; s.c = ca; stack.push_back(s);
    s.a = ab; s.b = t.b; s.c = bc; stack.push_back(s);
    s.a = ca; s.b = bc; s.c = t.c; stack.push_back(s);
    s.a = ab; s.b = bc; s.c = ca; stack.push_back(s);
  }
  tris.swap(out);
}

struct TemplateMesh {
  std::vector<Tri> tris;
  double height = 0;  // canonical height used for part banding
};

inline TemplateMesh build_template(const SyntheticSpec& spec) {
  // Start facets a little above the pitch; one subdivision level then lands
  // just under it without producing slivers.
  MeshBuilder mb(1.6 * spec.pitch);
  const double r = 0.5 * std::min(spec.dims.x(), spec.dims.y());
  const double H = spec.dims.z();
  const double wall = std::min(0.004, 0.35 * r);
  switch (spec.category) {
    case Category::glass:
      mb.cylinder_side(0, 0, r, 0, H, 0, +1);
      mb.cylinder_side(0, 0, r - wall, wall, H, 0, -1);
      mb.annulus(0, 0, 0, r, 0, -1, 0);
      mb.annulus(0, 0, 0, r - wall, wall, +1, 0);
      mb.annulus(0, 0, r - wall, r, H, +1, 0);
      break;
    case Category::can:
      mb.cylinder_side(0, 0, r, 0, H, 0, +1);
      mb.annulus(0, 0, 0, r, 0, -1, 0);
      mb.annulus(0, 0, 0, r, H, +1, 0);
      break;
    case Category::bottle: {
      double body_h = 0.62 * H, shoulder_h = 0.12 * H;
      double rn = 0.35 * r;
      mb.cylinder_side(0, 0, r, 0, body_h, 0, +1);
      mb.annulus(0, 0, 0, r, 0, -1, 0);
      // conical shoulder approximated by stacked rings
      int steps = 4;
      for (int i = 0; i < steps; ++i) {
        double z0 = body_h + shoulder_h * i / steps;
        double z1 = body_h + shoulder_h * (i + 1) / steps;
        double r0 = r + (rn - r) * i / steps;
        double r1 = r + (rn - r) * (i + 1) / steps;
        mb.cylinder_side(0, 0, 0.5 * (r0 + r1), z0, z1, 0, +1);
      }
      mb.cylinder_side(0, 0, rn, body_h + shoulder_h, H, 0, +1);
      mb.annulus(0, 0, 0, rn, H, +1, 0);
      break;
    }
    case Category::cup: {
      mb.cylinder_side(0, 0, r, 0, H, 0, +1);
      mb.cylinder_side(0, 0, r - wall, wall, H, 0, -1);
      mb.annulus(0, 0, 0, r, 0, -1, 0);
      mb.annulus(0, 0, 0, r - wall, wall, +1, 0);
      mb.annulus(0, 0, r - wall, r, H, +1, 0);
      // handle apex stays below the rim so the top region of the body is
      // handle-free from any viewpoint
      double Rh = 0.25 * H, rt = std::min(0.0075, 0.3 * Rh);
      Vec3 c(r + 0.15 * Rh, 0, 0.45 * H);
      mb.torus_arc(c, Vec3::UnitY(), Vec3::UnitX(), Rh, rt, -0.55 * M_PI,
                   0.55 * M_PI, 1);
      break;
    }
    case Category::bowl: {
      double R = std::max(r, H);  // sphere radius; rim sits at z = H
      double cz = H;
      double phi_max = std::asin(std::min(1.0, r / R));
      (void)phi_max;
      // use the lower cap of a sphere of radius H centred at z = H
      mb.sphere_band(0, 0, cz, H, 0, 0.5 * M_PI, 0, +1);
      mb.sphere_band(0, 0, cz, H - wall, 0.15 * M_PI, 0.5 * M_PI, 0, -1);
      mb.annulus(0, 0, H - wall, H, H, +1, 0);
      break;
    }
    case Category::pot: {
      mb.cylinder_side(0, 0, r, 0, H, 0, +1);
      mb.cylinder_side(0, 0, r - wall, wall, H, 0, -1);
      mb.annulus(0, 0, 0, r, 0, -1, 0);
      mb.annulus(0, 0, 0, r - wall, wall, +1, 0);
      mb.annulus(0, 0, r - wall, r, H, +1, 0);
      double Rh = std::min(0.035, 0.5 * r), rt = 0.007;
      for (int s = 0; s < std::max(1, spec.handle_count); ++s) {
        double side = s == 0 ? 1.0 : -1.0;
        Vec3 c(side * (r + 0.1 * Rh), 0, 0.8 * H);
        Vec3 ref = Vec3(side, 0, 0);
        mb.torus_arc(c, Vec3::UnitZ(), ref, Rh, rt, -0.5 * M_PI, 0.5 * M_PI, 1);
      }
      break;
    }
    case Category::pan: {
      mb.cylinder_side(0, 0, r, 0, H, 0, +1);
      mb.cylinder_side(0, 0, r - wall, wall, H, 0, -1);
      mb.annulus(0, 0, 0, r, 0, -1, 0);
      mb.annulus(0, 0, 0, r - wall, wall, +1, 0);
      mb.annulus(0, 0, r - wall, r, H, +1, 0);
      double L = std::min(0.16, 1.4 * r), w = 0.013, t = 0.009;
      double z0 = std::max(0.0, 0.6 * H - t / 2);
      mb.box(Vec3(r - 0.005, -w, z0), Vec3(r + L, w, z0 + t), 1);
      break;
    }
    case Category::hammer: {
      double hw = 0.012;
      mb.box(Vec3(-hw, -hw, 0), Vec3(hw, hw, 0.72 * H), 1);
      double hx = 0.5 * spec.dims.x(), hy = 0.5 * spec.dims.y();
      mb.box(Vec3(-hx, -hy, 0.72 * H), Vec3(hx, hy, H), 2);
      break;
    }
    case Category::knife: {
      double hx = 0.011, hy = 0.009;
      mb.box(Vec3(-hx, -hy, 0), Vec3(hx, hy, 0.45 * H), 1);
      double bx = 0.5 * spec.dims.x(), by = 0.002;
      mb.box(Vec3(-bx, -by, 0.45 * H), Vec3(bx, by, H), 2);
      break;
    }
    case Category::screwdriver: {
      double rh = 0.5 * std::min(spec.dims.x(), spec.dims.y());
      mb.cylinder_side(0, 0, rh, 0, 0.45 * H, 1, +1);
      mb.annulus(0, 0, 0, rh, 0, -1, 1);
      mb.annulus(0, 0, 0, rh, 0.45 * H, +1, 1);
      double rs = 0.0035;
      mb.cylinder_side(0, 0, rs, 0.45 * H, H, 2, +1);
      mb.annulus(0, 0, 0, rs, H, +1, 2);
      break;
    }
    case Category::cooking_tool: {
      double hx = 0.012, hy = 0.006;
      mb.box(Vec3(-hx, -hy, 0), Vec3(hx, hy, 0.62 * H), 1);
      double bx = 0.5 * spec.dims.x(), by = 0.004;
      mb.box(Vec3(-bx, -by, 0.62 * H), Vec3(bx, by, H), 2);
      break;
    }
  }
  TemplateMesh tm;
  tm.tris = std::move(mb.tris);
  tm.height = H;
  return tm;
}

inline Eigen::Matrix3d pose_rotation(Pose pose) {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  if (pose == Pose::sideways)
    R = Eigen::AngleAxisd(-M_PI / 2, Vec3::UnitY()).toRotationMatrix();
  else if (pose == Pose::upsidedown)
    R = Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix();
  return R;
}

}  // namespace detail

inline void validate(const SyntheticSpec& spec) {
  if (!(spec.dims.x() > 0 && spec.dims.y() > 0 && spec.dims.z() > 0))
    throw InputError("synthetic spec: dimensions must be positive");
  if (spec.noise_sigma < 0)
    throw InputError("synthetic spec: noise_sigma must be >= 0");
  if (spec.pitch <= 0)
    throw InputError("synthetic spec: pitch must be positive");
  int want = 0;
  if (spec.category == Category::cup || spec.category == Category::pan) want = 1;
  if (spec.category == Category::pot) want = 2;
  if (is_tool_category(spec.category)) want = 0;
  if (spec.handle_count != want && !(spec.category == Category::pot &&
                                     spec.handle_count == 1))
    throw InputError(std::string("synthetic spec: category ") +
                     to_string(spec.category) + " does not support " +
                     std::to_string(spec.handle_count) + " handles");
  if (spec.view_dir && spec.view_dir->norm() < 1e-9)
    throw InputError("synthetic spec: zero view direction");
}

// Deterministic sampling of a synthetic desk object. Every subdivided surface
// triangle draws the same RNG sequence (keep decision, barycentric location,
// noise), so clouds are reproducible per seed and an occluded view is an exact
// subset of the unoccluded one. Triangles are kept with probability
// area / pitch^2, which lands the density near one point per pitch cell
// regardless of how finely the subdivision had to cut.
inline PointCloud generate_object(const SyntheticSpec& spec,
                                  std::uint64_t seed) {
  validate(spec);
  detail::TemplateMesh tm = detail::build_template(spec);
  detail::subdivide(tm.tris, spec.pitch);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::Matrix3d R = detail::pose_rotation(spec.pose);

  PointCloud cloud;
  cloud.meta.category = spec.category;
  cloud.meta.pose = spec.pose;
  cloud.meta.contains = spec.contains;
  cloud.pts.reserve(tm.tris.size() / 2);

  Vec3 view = spec.view_dir ? spec.view_dir->normalized() : Vec3::Zero();
  const double cell = spec.pitch * spec.pitch;

  double zmin = std::numeric_limits<double>::max();
  for (const auto& t : tm.tris) {
    double keep = uni(rng);
    double u = uni(rng), v = uni(rng);
    double n1 = gauss(rng);
    double area = 0.5 * (t.b - t.a).cross(t.c - t.a).norm();
    if (keep * cell >= area) continue;
    if (u + v > 1.0) { u = 1.0 - u; v = 1.0 - v; }
    Vec3 p = t.a + u * (t.b - t.a) + v * (t.c - t.a);
    Vec3 n = detail::analytic_normal(t, p);
    if (spec.noise_sigma > 0) p += spec.noise_sigma * n1 * n;

    Point q;
    q.p = R * p;
    q.n = (R * n).normalized();
    switch (t.comp) {
      case 1: q.gt_part = PartLabel::handle; break;
      case 2: q.gt_part = PartLabel::usable_area; break;
      default: {
        double f = tm.height > 0 ? p.z() / tm.height : 0.0;
        if (is_tool_category(spec.category)) q.gt_part = PartLabel::handle;
        else q.gt_part = f < 1.0 / 3 ? PartLabel::bottom
                        : f < 2.0 / 3 ? PartLabel::middle : PartLabel::top;
        break;
      }
    }
    if (spec.view_dir && q.n.dot(view) <= 0) continue;
    cloud.pts.push_back(q);
    zmin = std::min(zmin, q.p.z());
  }
  if (cloud.pts.empty())
    throw InputError("synthetic spec: no visible points for given view");

  for (auto& q : cloud.pts) {
    q.p.z() -= zmin;
    if (q.p.z() < 0) q.p.z() = 0;
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// k-d tree for exact nearest neighbour queries (3D, smallish clouds).

class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& pts) : pts_(pts) {
    idx_.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) idx_[i] = int(i);
    if (!pts.empty()) build(0, int(pts.size()), 0);
  }

  static KdTree from_cloud(const PointCloud& cloud) {
    std::vector<Vec3> pts;
    pts.reserve(cloud.size());
    for (const auto& q : cloud.pts) pts.push_back(q.p);
    return KdTree(pts);
  }

  // Indices of the k nearest neighbours of p, ordered by (distance, index)
  // so results are deterministic under ties.
  std::vector<int> knn(const Vec3& p, int k, int exclude = -1) const {
    std::vector<std::pair<double, int>> best;
    knn_rec(0, int(pts_.size()), 0, p, k, exclude, best);
    std::sort(best.begin(), best.end());
    std::vector<int> out;
    out.reserve(best.size());
    for (auto& [d, i] : best) out.push_back(i);
    return out;
  }

  std::vector<int> radius(const Vec3& p, double r) const {
    std::vector<int> out;
    radius_rec(0, int(pts_.size()), 0, p, r * r, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  double nearest_dist(const Vec3& p, int exclude = -1) const {
    auto nn = knn(p, 1, exclude);
    return nn.empty() ? std::numeric_limits<double>::infinity()
                      : (pts_[nn[0]] - p).norm();
  }

 private:
  void build(int lo, int hi, int depth) {
    if (hi - lo <= 1) return;
    int axis = depth % 3;
    int mid = (lo + hi) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [&](int a, int b) {
                       if (pts_[a][axis] != pts_[b][axis])
                         return pts_[a][axis] < pts_[b][axis];
                       return a < b;
                     });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void knn_rec(int lo, int hi, int depth, const Vec3& p, int k, int exclude,
               std::vector<std::pair<double, int>>& best) const {
    if (lo >= hi) return;
    int axis = depth % 3;
    int mid = (lo + hi) / 2;
    int i = idx_[mid];
    if (i != exclude) {
      double d2 = (pts_[i] - p).squaredNorm();
      best.emplace_back(d2, i);
      std::push_heap(best.begin(), best.end());
      if (int(best.size()) > k) {
        std::pop_heap(best.begin(), best.end());
        best.pop_back();
      }
    }
    double delta = p[axis] - pts_[i][axis];
    int near_lo = delta < 0 ? lo : mid + 1;
    int near_hi = delta < 0 ? mid : hi;
    int far_lo = delta < 0 ? mid + 1 : lo;
    int far_hi = delta < 0 ? hi : mid;
    knn_rec(near_lo, near_hi, depth + 1, p, k, exclude, best);
    double worst = best.size() < std::size_t(k)
                       ? std::numeric_limits<double>::max()
                       : best.front().first;
    if (delta * delta <= worst)
      knn_rec(far_lo, far_hi, depth + 1, p, k, exclude, best);
  }

  void radius_rec(int lo, int hi, int depth, const Vec3& p, double r2,
                  std::vector<int>& out) const {
    if (lo >= hi) return;
    int axis = depth % 3;
    int mid = (lo + hi) / 2;
    int i = idx_[mid];
    if ((pts_[i] - p).squaredNorm() <= r2) out.push_back(i);
    double delta = p[axis] - pts_[i][axis];
    int near_lo = delta < 0 ? lo : mid + 1;
    int near_hi = delta < 0 ? mid : hi;
    int far_lo = delta < 0 ? mid + 1 : lo;
    int far_hi = delta < 0 ? hi : mid;
    radius_rec(near_lo, near_hi, depth + 1, p, r2, out);
    if (delta * delta <= r2) radius_rec(far_lo, far_hi, depth + 1, p, r2, out);
  }

  std::vector<Vec3> pts_;
  std::vector<int> idx_;
};

// PCA normal estimation over the k nearest neighbours; normals are oriented
// away from the cloud centroid.
inline void estimate_normals(PointCloud& cloud, int k = 12) {
  if (cloud.pts.empty()) return;
  k = std::min<int>(k, int(cloud.size()) - 1);
  if (k < 2) {
    for (auto& q : cloud.pts) q.n = Vec3::UnitZ();
    return;
  }
  KdTree tree = KdTree::from_cloud(cloud);
  Vec3 centre = cloud.centroid();
  for (std::size_t i = 0; i < cloud.pts.size(); ++i) {
    auto nb = tree.knn(cloud.pts[i].p, k + 1);
    Vec3 mean = Vec3::Zero();
    for (int j : nb) mean += cloud.pts[j].p;
    mean /= double(nb.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int j : nb) {
      Vec3 d = cloud.pts[j].p - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    Vec3 n = es.eigenvectors().col(0);
    if (n.dot(cloud.pts[i].p - centre) < 0) n = -n;
    cloud.pts[i].n = n.normalized();
  }
}

// ---------------------------------------------------------------------------
// Least-squares circle fit (Kasa method) on 2D samples. Returns false when
// the system is degenerate (collinear or too few points).

struct CircleFit {
  double cx = 0, cy = 0, r = 0;
  double rms = 0;  // RMS radial residual
};

inline bool fit_circle(const std::vector<Eigen::Vector2d>& xy, CircleFit& out) {
  if (xy.size() < 3) return false;
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Vec3 b = Vec3::Zero();
  for (const auto& q : xy) {
    double x = q.x(), y = q.y();
    Vec3 row(x, y, 1.0);
    A += row * row.transpose();
    b += (x * x + y * y) * row;
  }
  Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
  if (!lu.isInvertible()) return false;
  Vec3 s = lu.solve(b);
  out.cx = 0.5 * s.x();
  out.cy = 0.5 * s.y();
  double rr = s.z() + out.cx * out.cx + out.cy * out.cy;
  if (rr <= 0) return false;
  out.r = std::sqrt(rr);
  double acc = 0;
  for (const auto& q : xy) {
    double d = std::hypot(q.x() - out.cx, q.y() - out.cy) - out.r;
    acc += d * d;
  }
  out.rms = std::sqrt(acc / double(xy.size()));
  return true;
}

// ---------------------------------------------------------------------------
// Cloud text I/O.
//
//   # object <id> [category=<c>] [pose=<p>] [contains=<empty|full>]
//   x y z nx ny nz [label]
//
// '%' starts a comment; blank lines are ignored.

namespace detail {

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline void save_cloud(const PointCloud& cloud, std::ostream& os) {
  os << "# object " << cloud.meta.id;
  if (cloud.meta.category) os << " category=" << to_string(*cloud.meta.category);
  if (cloud.meta.pose) os << " pose=" << to_string(*cloud.meta.pose);
  if (cloud.meta.contains) os << " contains=" << to_string(*cloud.meta.contains);
  os << "\n";
  for (const auto& q : cloud.pts) {
    os << detail::fmt_double(q.p.x()) << ' ' << detail::fmt_double(q.p.y())
       << ' ' << detail::fmt_double(q.p.z()) << ' '
       << detail::fmt_double(q.n.x()) << ' ' << detail::fmt_double(q.n.y())
       << ' ' << detail::fmt_double(q.n.z());
    if (q.gt_part) os << ' ' << to_string(*q.gt_part);
    os << "\n";
  }
}

inline void save_cloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot open for writing: " + path);
  save_cloud(cloud, f);
}

inline PointCloud load_cloud(std::istream& is, const std::string& name = "<stream>") {
  PointCloud cloud;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  auto fail = [&](const std::string& msg) {
    throw InputError(name + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(is, line)) {
    ++lineno;
    auto cut = line.find('%');
    if (cut != std::string::npos) line.erase(cut);
    // trim
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string word;
      hs >> word;
      if (word != "object") fail("header must start with '# object'");
      if (!(hs >> cloud.meta.id)) fail("missing object id in header");
      while (hs >> word) {
        auto eq = word.find('=');
        if (eq == std::string::npos) fail("bad header attribute '" + word + "'");
        std::string key = word.substr(0, eq), val = word.substr(eq + 1);
        if (key == "category") {
          auto c = category_from(val);
          if (!c) fail("unknown category '" + val + "'");
          cloud.meta.category = c;
        } else if (key == "pose") {
          auto p = pose_from(val);
          if (!p) fail("unknown pose '" + val + "'");
          cloud.meta.pose = p;
        } else if (key == "contains") {
          if (val == "empty") cloud.meta.contains = Containment::empty;
          else if (val == "full") cloud.meta.contains = Containment::full;
          else fail("contains must be empty or full, got '" + val + "'");
        } else {
          fail("unknown header attribute '" + key + "'");
        }
      }
      have_header = true;
      continue;
    }
    std::istringstream ps(line);
    Point q;
    if (!(ps >> q.p.x() >> q.p.y() >> q.p.z() >> q.n.x() >> q.n.y() >> q.n.z()))
      fail("expected 'x y z nx ny nz [label]'");
    std::string label;
    if (ps >> label) {
      auto l = part_label_from(label);
      if (!l) fail("unknown part label '" + label + "'");
      q.gt_part = l;
      std::string extra;
      if (ps >> extra) fail("trailing token '" + extra + "'");
    }
    if (std::abs(q.n.norm() - 1.0) > 1e-6)
      fail("normal is not unit length");
    if (q.p.z() < -1e-6) fail("point below the table plane");
    cloud.pts.push_back(q);
  }
  if (!have_header) {
    lineno = 1;
    fail("missing '# object' header");
  }
  return cloud;
}

inline PointCloud load_cloud(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open: " + path);
  return load_cloud(f, path);
}

}  // namespace plg
