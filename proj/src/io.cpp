#include "planeway/io.hpp"

#include "planeway/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

namespace planeway {
namespace {

constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------- text input

struct LineCursor {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::size_t line_start = 0;

  bool next(std::string_view& line) {
    if (pos >= text.size()) return false;
    line_start = pos;
    const std::size_t end = text.find('\n', pos);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    line = text.substr(pos, stop - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    return true;
  }
};

[[noreturn]] void parse_fail(const std::string& name, const LineCursor& cur, const std::string& msg) {
  throw Error(ErrorCode::ParseError, name + ":" + std::to_string(cur.line_no) + ": " + msg + " (byte " +
                                         std::to_string(cur.line_start) + ")");
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t b = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

bool to_double(std::string_view tok, double& v) {
  const char* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(tok.data(), end, v);
  return ec == std::errc() && p == end;
}

// --------------------------------------------------------------- json output

void write_number(std::string& out, double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "cannot serialize a non-finite number");
  if (v == 0.0) v = 0.0;  // drop the sign of zero
  char buf[400];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  if (ec != std::errc()) throw Error(ErrorCode::IoError, "number formatting failed");
  out.append(buf, p);
}

bool is_scalar(const Json& j) { return !j.is_object() && !j.is_array(); }

void write_json(std::string& out, const Json& j, int indent) {
  const std::string pad(indent, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + " " + Json(it.key()).dump() + ": ";
        write_json(out, it.value(), indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      const bool flat = std::all_of(j.begin(), j.end(), is_scalar);
      const bool short_rows = std::all_of(j.begin(), j.end(), [](const Json& e) {
        return e.is_array() && e.size() <= 6 && std::all_of(e.begin(), e.end(), is_scalar);
      });
      if (j.empty() || flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ",";
          write_json(out, j[i], 0);
        }
        out += "]";
        return;
      }
      if (short_rows) {
        // Point lists: one line for the whole list keeps files compact.
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ",";
          write_json(out, j[i], 0);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad + " ";
        write_json(out, j[i], indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float:
      write_number(out, j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

// ---------------------------------------------------------------- json input

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::ParseError, msg); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) bad(std::string("expected an object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) bad(std::string("missing key '") + key + "'");
  return *it;
}

double num(const Json& j, const char* what = "number") {
  if (!j.is_number()) bad(std::string("expected a number for ") + what);
  return j.get<double>();
}

int integer(const Json& j, const char* what = "integer") {
  if (!j.is_number_integer()) bad(std::string("expected an integer for ") + what);
  return j.get<int>();
}

template <int N>
Eigen::Matrix<double, N, 1> vec(const Json& j, const char* what = "vector") {
  if (!j.is_array() || j.size() != N) bad(std::string("expected ") + std::to_string(N) + " numbers for " + what);
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v(i) = num(j[i], what);
  return v;
}

Json vec_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }
Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json frame_json(const Transform& f) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(round_decimals(f.rotation(r, c), 6));
  }
  Json t = Json::array();
  for (int i = 0; i < 3; ++i) t.push_back(round_decimals(f.translation(i), 6));
  return {{"rotation", rot}, {"translation", t}};
}

Transform frame_from(const Json& j) {
  const Json& rot = field(j, "rotation");
  if (!rot.is_array() || rot.size() != 9) bad("frame rotation needs 9 numbers");
  Transform f;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) f.rotation(r, c) = num(rot[3 * r + c], "rotation");
  }
  if (std::abs(f.rotation.determinant() - 1.0) > 1e-3) bad("frame rotation is not a rotation");
  f.rotation = orthonormalize(f.rotation);
  f.translation = vec<3>(field(j, "translation"), "translation");
  return f;
}

Json polygon_json(const ConvexPolygon2D& p) {
  Json a = Json::array();
  for (const Vec2& v : p.vertices()) a.push_back(vec_json(v));
  return a;
}

ConvexPolygon2D polygon_from(const Json& j) {
  if (!j.is_array()) bad("polygon must be an array of points");
  std::vector<Vec2> pts;
  for (const Json& v : j) pts.push_back(vec<2>(v, "polygon vertex"));
  try {
    return ConvexPolygon2D(pts);
  } catch (const Error& e) {
    bad(std::string("invalid polygon: ") + e.what());
  }
}

Json segment_json(const Segment3D& s) { return Json::array({vec_json(s.a), vec_json(s.b)}); }

Segment3D segment_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) bad("segment needs two points");
  return {vec<3>(j[0], "segment point"), vec<3>(j[1], "segment point")};
}

void expect_format(const Json& j, const std::string& format) {
  if (!j.is_object()) bad("document must be a JSON object");
  auto it = j.find("format");
  if (it == j.end() || !it->is_string() || it->get<std::string>() != format) bad("not a " + format + " document");
  if (integer(field(j, "version"), "version") != kFormatVersion) bad("unsupported " + format + " version");
}

// ------------------------------------------------------------------- config

// One visitor per section keeps the field list in a single place.
template <class F>
void visit(ExtractionConfig& c, F&& f) {
  f("voxel", c.voxel);
  f("k_neighbors", c.k_neighbors);
  f("outlier_std_ratio", c.outlier_std_ratio);
  f("angle_threshold_deg", c.angle_threshold_deg);
  f("dist_threshold", c.dist_threshold);
  f("min_segment_points", c.min_segment_points);
  f("traversable_max_inclination_deg", c.traversable_max_inclination_deg);
  f("ground_max_inclination_deg", c.ground_max_inclination_deg);
  f("thickness_gap", c.thickness_gap);
  f("gap_threshold", c.gap_threshold);
  f("tread_max_depth", c.tread_max_depth);
  f("tread_max_inclination_deg", c.tread_max_inclination_deg);
  f("rise_min", c.rise_min);
  f("rise_max", c.rise_max);
  f("rise_regularity", c.rise_regularity);
  f("expand_margin", c.expand_margin);
  f("min_interline_length", c.min_interline_length);
  f("alpha", c.alpha);
  f("same_size_ratio_min", c.same_size_ratio_min);
  f("same_size_ratio_max", c.same_size_ratio_max);
}

template <class F>
void visit(MappingConfig& c, F&& f) {
  f("resolution", c.resolution);
  f("clearance_height", c.clearance_height);
  f("interline_halfwidth", c.interline_halfwidth);
}

template <class F>
void visit(GraphConfig& c, F&& f) {
  f("projection_max_dist", c.projection_max_dist);
}

template <class F>
void visit(RobotLimits& c, F&& f) {
  f("v_max", c.v_max);
  f("omega_max", c.omega_max);
  f("theta_s", c.theta_s);
  f("d_s", c.d_s);
  f("r_rise", c.r_rise);
  f("r_decline", c.r_decline);
}

template <class F>
void visit(OptimizerConfig& c, F&& f) {
  f("weight_theta", c.weight_theta);
  f("weight_s", c.weight_s);
  f("eps_T", c.eps_T);
  f("w_vel", c.w_vel);
  f("w_mom", c.w_mom);
  f("w_orient", c.w_orient);
  f("w_safe", c.w_safe);
  f("rho0", c.rho0);
  f("rho_gamma", c.rho_gamma);
  f("rho_max", c.rho_max);
  f("e_max", c.e_max);
  f("max_outer", c.max_outer);
  f("max_inner", c.max_inner);
  f("n_cons", c.n_cons);
  f("n_quad", c.n_quad);
  f("segment_length", c.segment_length);
  f("grad_tol", c.grad_tol);
  f("inner_rel_decrease", c.inner_rel_decrease);
  f("constraint_margin", c.constraint_margin);
  f("safety_margin", c.safety_margin);
  f("tol_cons", c.tol_cons);
  f("max_escalations", c.max_escalations);
  f("check_rate", c.check_rate);
}

Json value_json(double v) { return v; }
Json value_json(int v) { return v; }
Json value_json(const RatioTable& t) {
  Json a = Json::array();
  for (const auto& [psi, r] : t.knots) a.push_back(Json::array({psi, r}));
  return a;
}

[[noreturn]] void config_fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

void read_value(const Json& j, const std::string& key, double& v) {
  if (!j.is_number()) config_fail("'" + key + "' must be a number");
  v = j.get<double>();
}
void read_value(const Json& j, const std::string& key, int& v) {
  if (!j.is_number_integer()) config_fail("'" + key + "' must be an integer");
  v = j.get<int>();
}
void read_value(const Json& j, const std::string& key, RatioTable& t) {
  if (!j.is_array() || j.empty()) config_fail("'" + key + "' must be a non-empty array of [psi_deg, ratio]");
  t.knots.clear();
  for (const Json& k : j) {
    if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number()) {
      config_fail("'" + key + "' entries must be [psi_deg, ratio]");
    }
    const double psi = k[0].get<double>(), r = k[1].get<double>();
    if (!t.knots.empty() && psi <= t.knots.back().first) config_fail("'" + key + "' knots must ascend in psi");
    if (!(r > 0.0 && r <= 1.0)) config_fail("'" + key + "' ratios must lie in (0, 1]");
    t.knots.emplace_back(psi, r);
  }
}

template <class Section>
Json section_json(Section s) {
  Json j = Json::object();
  visit(s, [&](const char* key, auto& v) { j[key] = value_json(v); });
  return j;
}

template <class Section>
void read_section(const Json& j, const std::string& name, Section& s) {
  if (!j.is_object()) config_fail("section '" + name + "' must be an object");
  std::vector<std::string> known;
  visit(s, [&](const char* key, auto& v) {
    known.emplace_back(key);
    auto it = j.find(key);
    if (it != j.end()) read_value(*it, name + "." + key, v);
  });
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      config_fail("unknown key '" + name + "." + it.key() + "'");
    }
  }
}

}  // namespace

// ----------------------------------------------------------------- files

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "cannot read '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
}

// ----------------------------------------------------------------- clouds

PointCloud parse_ply(const std::string& text, const std::string& name) {
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> props;
    bool has_list = false;
  };
  LineCursor cur{text};
  std::string_view line;
  if (!cur.next(line) || split_ws(line) != std::vector<std::string_view>{"ply"}) parse_fail(name, cur, "missing 'ply' magic");
  std::vector<Element> elements;
  bool ascii = false, ended = false;
  while (cur.next(line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) parse_fail(name, cur, "malformed format line");
      if (tok[1] != "ascii") parse_fail(name, cur, "only ASCII PLY is supported, got '" + std::string(tok[1]) + "'");
      if (tok[2] != "1.0") parse_fail(name, cur, "unsupported PLY version '" + std::string(tok[2]) + "'");
      ascii = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_fail(name, cur, "malformed element line");
      Element e;
      e.name = tok[1];
      double count = 0.0;
      if (!to_double(tok[2], count) || count < 0 || count != std::floor(count)) parse_fail(name, cur, "bad element count");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(e);
    } else if (tok[0] == "property") {
      if (elements.empty()) parse_fail(name, cur, "property before any element");
      if (tok.size() == 5 && tok[1] == "list") {
        elements.back().has_list = true;
        elements.back().props.emplace_back(tok[4]);
      } else if (tok.size() == 3) {
        elements.back().props.emplace_back(tok[2]);
      } else {
        parse_fail(name, cur, "malformed property line");
      }
    } else if (tok[0] == "end_header") {
      ended = true;
      break;
    } else {
      parse_fail(name, cur, "unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!ended) parse_fail(name, cur, "header has no end_header");
  if (!ascii) parse_fail(name, cur, "header has no format line");

  PointCloud cloud;
  bool have_vertex = false;
  for (const Element& e : elements) {
    int ix = -1, iy = -1, iz = -1;
    if (e.name == "vertex") {
      if (e.has_list) parse_fail(name, cur, "list property in vertex element");
      for (std::size_t k = 0; k < e.props.size(); ++k) {
        if (e.props[k] == "x") ix = static_cast<int>(k);
        if (e.props[k] == "y") iy = static_cast<int>(k);
        if (e.props[k] == "z") iz = static_cast<int>(k);
      }
      if (ix < 0 || iy < 0 || iz < 0) parse_fail(name, cur, "vertex element lacks x, y or z");
      have_vertex = true;
      cloud.points.reserve(e.count);
    }
    for (std::size_t n = 0; n < e.count; ++n) {
      if (!cur.next(line)) parse_fail(name, cur, "unexpected end of file in element '" + e.name + "'");
      if (e.name != "vertex") continue;
      const auto tok = split_ws(line);
      if (tok.size() != e.props.size()) {
        parse_fail(name, cur, "expected " + std::to_string(e.props.size()) + " values, got " + std::to_string(tok.size()));
      }
      Vec3 p;
      const int idx[3] = {ix, iy, iz};
      for (int a = 0; a < 3; ++a) {
        if (!to_double(tok[idx[a]], p(a))) parse_fail(name, cur, "bad number '" + std::string(tok[idx[a]]) + "'");
      }
      cloud.points.push_back(p);
    }
  }
  if (!have_vertex) parse_fail(name, cur, "no vertex element");
  return cloud;
}

PointCloud parse_xyz(const std::string& text, const std::string& name) {
  LineCursor cur{text};
  std::string_view line;
  PointCloud cloud;
  while (cur.next(line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 3) parse_fail(name, cur, "expected at least 3 columns");
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      if (!to_double(tok[a], p(a))) parse_fail(name, cur, "bad number '" + std::string(tok[a]) + "'");
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

PointCloud read_cloud(const std::string& path) {
  const std::string text = read_file(path);
  if (text.rfind("ply", 0) == 0) return parse_ply(text, path);
  return parse_xyz(text, path);
}

std::string ply_cloud(const PointCloud& cloud, const std::string& comment) {
  std::string out = "ply\nformat ascii 1.0\n";
  if (!comment.empty()) out += "comment " + comment + "\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\nend_header\n";
  char buf[96];
  for (const Vec3& p : cloud.points) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", p.x() + 0.0, p.y() + 0.0, p.z() + 0.0);
    out += buf;
  }
  return out;
}

// ------------------------------------------------------------------- json

std::string dump_json(const Json& j) {
  std::string out;
  write_json(out, j, 0);
  out += "\n";
  return out;
}

Json parse_json(const std::string& text, const std::string& name) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // Report the line as well as the byte nlohmann gives.
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const std::size_t line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte > 0 ? byte - 1 : 0), '\n');
    throw Error(ErrorCode::ParseError, name + ":" + std::to_string(line) + ": invalid JSON (byte " +
                                           std::to_string(byte) + ")");
  }
}

Json to_json(const RunConfig& config) {
  RunConfig c = config;
  return {{"version", c.version},
          {"extraction", section_json(c.extraction)},
          {"mapping", section_json(c.mapping)},
          {"graph", section_json(c.graph)},
          {"robot", section_json(c.robot)},
          {"optimizer", section_json(c.optimizer)}};
}

RunConfig config_from_json(const Json& j) {
  if (!j.is_object()) config_fail("config must be a JSON object");
  RunConfig c;
  auto v = j.find("version");
  if (v == j.end()) config_fail("config lacks 'version'");
  if (!v->is_number_integer() || v->get<int>() != c.version) config_fail("unsupported config version");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "version") continue;
    if (k == "extraction") read_section(*it, k, c.extraction);
    else if (k == "mapping") read_section(*it, k, c.mapping);
    else if (k == "graph") read_section(*it, k, c.graph);
    else if (k == "robot") read_section(*it, k, c.robot);
    else if (k == "optimizer") read_section(*it, k, c.optimizer);
    else config_fail("unknown key '" + k + "'");
  }
  const OptimizerConfig& o = c.optimizer;
  if (o.n_cons < 1 || o.n_quad < 2 || o.n_quad % (2 * o.n_cons) != 0) config_fail("n_quad must be a multiple of 2 * n_cons");
  if (!(c.mapping.resolution > 0.0) || !(c.extraction.voxel > 0.0)) config_fail("resolution and voxel must be positive");
  if (!(c.robot.v_max > 0.0) || !(c.robot.omega_max > 0.0) || !(c.robot.d_s >= 0.0)) config_fail("robot limits must be positive");
  if (o.max_outer < 1 || o.max_inner < 1) config_fail("iteration limits must be positive");
  return c;
}

// ------------------------------------------------------------------ planes

Json to_json(const PlaneSet& set) {
  Json trav = Json::array();
  for (const TraversablePlane& p : set.traversable) {
    Json links = Json::array();
    for (const PlaneLink& l : p.neighbors) links.push_back({{"plane", l.plane}, {"segment", segment_json(l.segment)}});
    Json esdf = Json::array();
    for (double v : p.grid.esdf_values()) esdf.push_back(round_decimals(v, 4));
    Json grid = {{"resolution", p.grid.resolution()},
                 {"origin", vec_json(p.grid.origin())},
                 {"width", p.grid.width()},
                 {"height", p.grid.height()},
                 {"states", p.grid.states_string()},
                 {"esdf", esdf}};
    trav.push_back({{"id", p.id},
                    {"kind", kind_name(p.kind)},
                    {"frame", frame_json(p.frame)},
                    {"inclination", round_decimals(p.inclination, 6)},
                    {"thickness", round_decimals(p.thickness, 6)},
                    {"point_count", p.point_count},
                    {"hull", polygon_json(p.hull)},
                    {"boundary", polygon_json(p.boundary)},
                    {"neighbors", links},
                    {"grid", grid}});
  }
  Json vert = Json::array();
  for (const VerticalPlane& v : set.vertical) {
    Json pts = Json::array();
    for (const Vec3& p : v.boundary_points) pts.push_back(vec_json(p));
    vert.push_back({{"frame", frame_json(v.frame)},
                    {"inclination", round_decimals(v.inclination, 6)},
                    {"boundary_points", pts}});
  }
  return {{"format", "planeway.planes"}, {"version", kFormatVersion}, {"traversable", trav}, {"vertical", vert}};
}

PlaneSet plane_set_from_json(const Json& j) {
  expect_format(j, "planeway.planes");
  PlaneSet set;
  const Json& trav = field(j, "traversable");
  if (!trav.is_array()) bad("'traversable' must be an array");
  for (const Json& tj : trav) {
    TraversablePlane p;
    p.id = integer(field(tj, "id"), "id");
    if (p.id != static_cast<int>(set.traversable.size())) bad("plane ids must be 0, 1, 2, ... in order");
    const Json& kind = field(tj, "kind");
    if (!kind.is_string()) bad("plane kind must be a string");
    p.kind = kind_from_name(kind.get<std::string>());
    if (p.kind == PlaneKind::Vertical) bad("vertical plane in the traversable list");
    p.frame = frame_from(field(tj, "frame"));
    p.inclination = num(field(tj, "inclination"), "inclination");
    p.thickness = num(field(tj, "thickness"), "thickness");
    const Json& pc = field(tj, "point_count");
    if (!pc.is_number_unsigned() && !pc.is_number_integer()) bad("point_count must be an integer");
    p.point_count = pc.get<std::size_t>();
    p.hull = polygon_from(field(tj, "hull"));
    p.boundary = polygon_from(field(tj, "boundary"));
    const Json& links = field(tj, "neighbors");
    if (!links.is_array()) bad("'neighbors' must be an array");
    for (const Json& lj : links) p.neighbors.push_back({integer(field(lj, "plane"), "plane"), segment_from(field(lj, "segment"))});
    const Json& gj = field(tj, "grid");
    const int w = integer(field(gj, "width"), "width"), h = integer(field(gj, "height"), "height");
    try {
      p.grid = GridMap(num(field(gj, "resolution"), "resolution"), vec<2>(field(gj, "origin"), "origin"), w, h);
    } catch (const Error& e) {
      bad(std::string("invalid grid: ") + e.what());
    }
    const Json& states = field(gj, "states");
    if (!states.is_string()) bad("grid states must be a string");
    const std::string codes = states.get<std::string>();
    const Json& esdf = field(gj, "esdf");
    if (codes.size() != p.grid.cell_count() || !esdf.is_array() || esdf.size() != p.grid.cell_count()) {
      bad("grid states/esdf do not match width x height");
    }
    for (std::size_t i = 0; i < codes.size(); ++i) {
      const auto s = state_from_code(codes[i]);
      if (!s) bad(std::string("unknown cell state '") + codes[i] + "'");
      p.grid.states()[i] = *s;
      p.grid.esdf_values()[i] = num(esdf[i], "esdf");
    }
    set.traversable.push_back(std::move(p));
  }
  const int n = static_cast<int>(set.traversable.size());
  for (const auto& p : set.traversable) {
    for (const auto& l : p.neighbors) {
      if (l.plane < 0 || l.plane >= n || l.plane == p.id) bad("neighbor link to an invalid plane");
    }
  }
  const Json& vert = field(j, "vertical");
  if (!vert.is_array()) bad("'vertical' must be an array");
  for (const Json& vj : vert) {
    VerticalPlane v;
    v.frame = frame_from(field(vj, "frame"));
    v.inclination = num(field(vj, "inclination"), "inclination");
    for (const Json& pj : field(vj, "boundary_points")) v.boundary_points.push_back(vec<3>(pj, "boundary point"));
    set.vertical.push_back(std::move(v));
  }
  return set;
}

// ------------------------------------------------------------------- graph

Json to_json(const PlaneGraph& graph) {
  Json verts = Json::array();
  for (const GraphVertex& v : graph.vertices) {
    verts.push_back({{"plane_pair", Json::array({v.plane_a, v.plane_b})},
                     {"world_point", vec_json(v.world_point)},
                     {"line_param", v.line_param}});
  }
  Json edges = Json::array();
  for (const GraphEdge& e : graph.edges) {
    Json poly = Json::array();
    for (const Vec2& p : e.polyline) poly.push_back(vec_json(p));
    edges.push_back({{"u", e.u}, {"v", e.v}, {"plane", e.plane}, {"cost", e.cost}, {"polyline", poly}});
  }
  return {{"format", "planeway.graph"}, {"version", kFormatVersion}, {"vertices", verts}, {"edges", edges}};
}

PlaneGraph graph_from_json(const Json& j, const std::vector<TraversablePlane>& planes) {
  expect_format(j, "planeway.graph");
  const int np = static_cast<int>(planes.size());
  PlaneGraph g;
  for (const Json& vj : field(j, "vertices")) {
    GraphVertex v;
    const Json& pair = field(vj, "plane_pair");
    if (!pair.is_array() || pair.size() != 2) bad("plane_pair needs two plane ids");
    v.plane_a = integer(pair[0], "plane id");
    v.plane_b = integer(pair[1], "plane id");
    if (v.plane_a < 0 || v.plane_b >= np || v.plane_a >= v.plane_b) bad("graph vertex references unknown planes");
    v.world_point = vec<3>(field(vj, "world_point"), "world_point");
    v.line_param = num(field(vj, "line_param"), "line_param");
    v.local_a = planes[v.plane_a].frame.project(v.world_point);
    v.local_b = planes[v.plane_b].frame.project(v.world_point);
    g.vertices.push_back(v);
  }
  const int nv = static_cast<int>(g.vertices.size());
  for (const Json& ej : field(j, "edges")) {
    GraphEdge e;
    e.u = integer(field(ej, "u"), "u");
    e.v = integer(field(ej, "v"), "v");
    e.plane = integer(field(ej, "plane"), "plane");
    e.cost = num(field(ej, "cost"), "cost");
    if (e.u < 0 || e.v < 0 || e.u >= nv || e.v >= nv || e.plane < 0 || e.plane >= np) bad("graph edge out of range");
    if (!g.vertices[e.u].touches(e.plane) || !g.vertices[e.v].touches(e.plane)) bad("graph edge plane mismatch");
    for (const Json& pj : field(ej, "polyline")) e.polyline.push_back(vec<2>(pj, "polyline point"));
    g.edges.push_back(std::move(e));
  }
  return g;
}

// -------------------------------------------------------------- trajectory

Json to_json(const CrossPlaneTrajectory& traj) {
  Json parts = Json::array();
  for (const TrajectoryPart& p : traj.parts) {
    Json segs = Json::array();
    for (int i = p.first_segment; i < p.first_segment + p.segment_count; ++i) {
      Json ct = Json::array(), cs = Json::array();
      for (int k = 0; k < 6; ++k) {
        ct.push_back(traj.spline.coeffs[i](k, 0));
        cs.push_back(traj.spline.coeffs[i](k, 1));
      }
      segs.push_back({{"T", traj.spline.durations[i]}, {"c_theta", ct}, {"c_s", cs}});
    }
    parts.push_back({{"plane", p.plane},
                     {"frame", frame_json(p.frame)},
                     {"delta_theta", p.delta_theta},
                     {"start_local", vec_json(p.start_local)},
                     {"segments", segs}});
  }
  Json crossings = Json::array();
  for (std::size_t k = 0; k < traj.crossing_segments.size(); ++k) {
    crossings.push_back({{"eta", traj.eta[k]},
                         {"segment", segment_json(traj.crossing_segments[k])},
                         {"point", vec_json(traj.crossing_points[k])}});
  }
  return {{"format", "planeway.trajectory"},
          {"version", kFormatVersion},
          {"n_quad", traj.n_quad},
          {"parts", parts},
          {"crossings", crossings}};
}

CrossPlaneTrajectory trajectory_from_json(const Json& j) {
  expect_format(j, "planeway.trajectory");
  CrossPlaneTrajectory t;
  t.n_quad = integer(field(j, "n_quad"), "n_quad");
  if (t.n_quad < 2 || t.n_quad % 2 != 0) bad("n_quad must be a positive even number");
  const Json& parts = field(j, "parts");
  if (!parts.is_array() || parts.empty()) bad("trajectory has no parts");
  for (const Json& pj : parts) {
    TrajectoryPart p;
    p.plane = integer(field(pj, "plane"), "plane");
    p.frame = frame_from(field(pj, "frame"));
    p.delta_theta = num(field(pj, "delta_theta"), "delta_theta");
    p.start_local = vec<2>(field(pj, "start_local"), "start_local");
    p.first_segment = t.spline.pieces();
    const Json& segs = field(pj, "segments");
    if (!segs.is_array() || segs.empty()) bad("trajectory part has no segments");
    for (const Json& sj : segs) {
      const Eigen::Matrix<double, 6, 1> ct = vec<6>(field(sj, "c_theta"), "c_theta");
      const Eigen::Matrix<double, 6, 1> cs = vec<6>(field(sj, "c_s"), "c_s");
      SegmentCoeffs c;
      c << ct, cs;
      const double T = num(field(sj, "T"), "T");
      if (!(T > 0.0)) bad("segment duration must be positive");
      t.spline.coeffs.push_back(c);
      t.spline.durations.push_back(T);
    }
    p.segment_count = t.spline.pieces() - p.first_segment;
    t.parts.push_back(p);
  }
  const Json& crossings = field(j, "crossings");
  if (!crossings.is_array() || crossings.size() + 1 != t.parts.size()) bad("need one crossing between consecutive parts");
  for (const Json& cj : crossings) {
    t.eta.push_back(num(field(cj, "eta"), "eta"));
    t.crossing_segments.push_back(segment_from(field(cj, "segment")));
    t.crossing_points.push_back(vec<3>(field(cj, "point"), "point"));
  }
  return t;
}

// ------------------------------------------------------------------ scenes

Json scene_truth_json(const Scene& scene) {
  Json surfaces = Json::array();
  for (const WalkableSurface& w : scene.walkable) {
    Json fp = Json::array();
    for (const Vec2& p : w.footprint) fp.push_back(vec_json(p));
    surfaces.push_back({{"label", w.label},
                        {"kind", kind_name(w.kind)},
                        {"normal", vec_json(w.normal)},
                        {"point", vec_json(w.point)},
                        {"footprint", fp}});
  }
  Json adjacency = Json::array();
  for (const auto& [a, b] : scene.adjacency) adjacency.push_back(Json::array({a, b}));
  Json patches = Json::array();
  for (const SurfacePatch& p : scene.patches) patches.push_back(p.label);
  return {{"format", "planeway.scene"},
          {"version", kFormatVersion},
          {"name", scene.spec.name},
          {"seed", scene.spec.seed},
          {"density", scene.spec.density},
          {"noise_sigma", scene.spec.noise_sigma},
          {"start", vec_json(scene.start)},
          {"goal", vec_json(scene.goal)},
          {"walkable", surfaces},
          {"adjacency", adjacency},
          {"patch_labels", patches},
          {"point_labels", scene.labels}};
}

// -------------------------------------------------------------------- csv

std::string trajectory_csv(const CrossPlaneTrajectory& traj, double rate) {
  std::string out = "t,x,y,z,yaw,v,omega,plane\n";
  const double total = traj.duration();
  const int n = static_cast<int>(std::ceil(total * rate - 1e-9));
  char buf[256];
  for (int k = 0; k <= n; ++k) {
    const double t = std::min(total, k / rate);
    const WorldState s = traj.world_state(t);
    std::snprintf(buf, sizeof(buf), "%.4f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", t, s.position.x() + 0.0,
                  s.position.y() + 0.0, s.position.z() + 0.0, s.yaw + 0.0, s.v + 0.0, s.omega + 0.0, s.plane);
    out += buf;
  }
  return out;
}

std::string convergence_csv(const std::vector<OuterLog>& log) {
  std::string out = "outer,escalation,constraint_norm,rho,inner_iterations,objective\n";
  char buf[256];
  for (const OuterLog& l : log) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.9e,%.6e,%d,%.9e\n", l.outer, l.escalation, l.constraint_norm, l.rho,
                  l.inner_iterations, l.objective);
    out += buf;
  }
  return out;
}

Json to_json(const DenseReport& r) {
  auto entry = [](double v, double t) -> Json {
    if (!std::isfinite(v)) return nullptr;  // family not active anywhere
    return {{"max", v}, {"t", t}};
  };
  return {{"velocity", entry(r.max_velocity, r.t_velocity)},
          {"moment", entry(r.max_moment, r.t_moment)},
          {"orientation", entry(r.max_orientation, r.t_orientation)},
          {"safety", entry(r.max_safety, r.t_safety)},
          {"max_diamond", r.max_diamond},
          {"joint_gap", r.joint_gap},
          {"crossing_gap", r.crossing_gap},
          {"crossing_rate_gap", r.crossing_rate_gap},
          {"surface_deviation", r.surface_deviation},
          {"samples", r.samples}};
}

double trajectory_length(const CrossPlaneTrajectory& traj, double rate) {
  const double total = traj.duration();
  const int n = std::max(1, static_cast<int>(std::ceil(total * rate)));
  double len = 0.0;
  Vec3 prev = traj.world_state(0.0).position;
  for (int k = 1; k <= n; ++k) {
    const Vec3 p = traj.world_state(std::min(total, k / rate)).position;
    len += (p - prev).norm();
    prev = p;
  }
  return len;
}

}  // namespace planeway
