#include "immf/bench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "immf/common/error.hpp"
#include "immf/common/io.hpp"

namespace immf::bench {

namespace {

// Row order of the comparison table; the ablation block starts at immfusion-wo-lf.
const std::vector<std::string> kMethodOrder = {
    "points-rgb",      "points-image-feature", "deepfusion",       "tokenfusion",
    "images-only",     "points-only",          "immfusion-wo-lf",  "immfusion-wo-mmm",
    "immfusion-wo-gim", "immfusion"};

bool is_ablation_block(const std::string& v) { return v.rfind("immfusion", 0) == 0; }
bool is_basic_scene(const std::string& s) { return s.rfind("lab", 0) == 0; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string cell(double joint, double vertex) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%5.1f %5.1f", joint, vertex);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

}  // namespace

void ExperimentMatrix::validate_complete() const {
  std::set<std::tuple<std::string, std::string, std::uint64_t>> seen;
  for (const auto& r : rows) {
    if (!seen.emplace(r.variant, r.scene, r.seed).second)
      throw ValidationError("matrix: duplicate row for " + r.variant + "/" + r.scene + "/" +
                            std::to_string(r.seed));
  }
  for (const auto& v : variants)
    for (const auto& s : scenes)
      for (auto seed : seeds)
        if (!seen.count({v, s, seed}))
          throw ValidationError("matrix: missing row for " + v + "/" + s + "/" + std::to_string(seed));
  if (seen.size() != variants.size() * scenes.size() * seeds.size())
    throw ValidationError("matrix: rows outside the declared grid");
}

std::string matrix_csv_header() {
  return "variant,scene,seed,frames,mean_joint_cm,max_joint_cm,mean_vertex_cm,max_vertex_cm";
}

std::string matrix_csv(std::span<const MetricsRow> rows) {
  std::string out = matrix_csv_header() + "\n";
  for (const auto& r : rows)
    out += r.variant + "," + r.scene + "," + std::to_string(r.seed) + "," + std::to_string(r.frames) +
           "," + num(r.mean_joint_cm) + "," + num(r.max_joint_cm) + "," + num(r.mean_vertex_cm) + "," +
           num(r.max_vertex_cm) + "\n";
  return out;
}

std::vector<MetricsRow> parse_matrix_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != matrix_csv_header())
    throw FormatError("matrix.csv: unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    if (f.size() != 8) throw FormatError("matrix.csv: expected 8 fields in '" + line + "'");
    try {
      rows.push_back({f[0], f[1], std::stoull(f[2]), std::stoull(f[3]), std::stod(f[4]),
                      std::stod(f[5]), std::stod(f[6]), std::stod(f[7])});
    } catch (const std::logic_error&) {
      throw FormatError("matrix.csv: bad number in '" + line + "'");
    }
  }
  return rows;
}

std::string format_report(const ExperimentMatrix& m) {
  // Seed means per (variant, scene).
  struct Acc {
    double mj = 0, xj = 0, mv = 0, xv = 0;
    std::size_t n = 0, frames = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> acc;
  for (const auto& r : m.rows) {
    auto& a = acc[{r.variant, r.scene}];
    a.mj += r.mean_joint_cm;
    a.xj += r.max_joint_cm;
    a.mv += r.mean_vertex_cm;
    a.xv += r.max_vertex_cm;
    a.frames = r.frames;
    ++a.n;
  }

  std::vector<std::string> basic, adverse;
  for (const auto& s : m.scenes) (is_basic_scene(s) ? basic : adverse).push_back(s);
  std::vector<std::string> scenes = basic;
  scenes.insert(scenes.end(), adverse.begin(), adverse.end());

  std::vector<std::string> methods, ablations;
  for (const auto& v : kMethodOrder)
    if (std::find(m.variants.begin(), m.variants.end(), v) != m.variants.end())
      (is_ablation_block(v) ? ablations : methods).push_back(v);
  for (const auto& v : m.variants)
    if (std::find(kMethodOrder.begin(), kMethodOrder.end(), v) == kMethodOrder.end())
      methods.push_back(v);

  std::size_t name_w = 8;
  for (const auto& v : m.variants) name_w = std::max(name_w, v.size() + 2);
  const std::size_t cell_w = 15;

  std::ostringstream out;
  out << "Errors (cm) of different methods; each cell is joint vertex.\n";
  out << "Seeds:";
  for (auto s : m.seeds) out << " " << s;
  out << " (cells are the mean over seeds)\n";
  out << "Scene value: unweighted mean over frames. Max error: mean over frames of the per-frame "
         "maximum.\n";
  out << "Average: unweighted mean over the scene columns.\n";

  auto group_header = [&] {
    std::string line = pad("", name_w) + "| ";
    if (!basic.empty()) line += pad("Basic Scenes", cell_w * basic.size()) + "| ";
    if (!adverse.empty()) line += pad("Adverse Environments", cell_w * adverse.size()) + "| ";
    line += "Average";
    std::string names = pad("Method", name_w) + "| ";
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      names += pad(scenes[i], cell_w);
      if (i + 1 == basic.size() || i + 1 == scenes.size()) names += "| ";
    }
    return line + "\n" + names + "\n";
  };

  for (int table = 0; table < 2; ++table) {
    out << "\n" << (table == 0 ? "Mean Error" : "Max Error") << "\n" << group_header();
    const std::string rule(name_w + cell_w * scenes.size() + 20, '-');
    out << rule << "\n";
    auto emit = [&](const std::string& v) {
      std::string line = pad(v, name_w) + "| ";
      double sj = 0, sv = 0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        auto it = acc.find({v, scenes[i]});
        if (it == acc.end()) {
          line += pad("    -     -", cell_w);
        } else {
          const auto& a = it->second;
          const double n = static_cast<double>(a.n);
          const double j = (table == 0 ? a.mj : a.xj) / n, vv = (table == 0 ? a.mv : a.xv) / n;
          line += pad(cell(j, vv), cell_w);
          sj += j;
          sv += vv;
          ++count;
        }
        if (i + 1 == basic.size() || i + 1 == scenes.size()) line += "| ";
      }
      if (count) line += cell(sj / static_cast<double>(count), sv / static_cast<double>(count));
      out << line << "\n";
    };
    for (const auto& v : methods) emit(v);
    if (!methods.empty() && !ablations.empty()) out << rule << "\n";
    for (const auto& v : ablations) emit(v);
  }
  return out.str();
}

void emit_report(const ExperimentMatrix& m, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto csv = matrix_csv(m.rows);
  io::write_file_atomic(dir / "matrix.csv", std::span<const char>(csv.data(), csv.size()));
  const auto txt = format_report(m);
  io::write_file_atomic(dir / "report.txt", std::span<const char>(txt.data(), txt.size()));
}

void export_mesh(const std::filesystem::path& path, std::span<const float> verts,
                 std::span<const bodysim::Face> faces) {
  if (verts.size() % 3 != 0) throw ShapeError("export_mesh: vertex array is not N x 3");
  std::string text;
  char buf[96];
  for (std::size_t i = 0; i < verts.size(); i += 3) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", verts[i], verts[i + 1], verts[i + 2]);
    text += buf;
  }
  for (const auto& f : faces) {
    std::snprintf(buf, sizeof buf, "f %u %u %u\n", f[0] + 1, f[1] + 1, f[2] + 1);
    text += buf;
  }
  io::write_file_atomic(path, std::span<const char>(text.data(), text.size()));
}

Mesh import_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Mesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      float x, y, z;
      if (!(ss >> x >> y >> z)) throw FormatError("mesh: bad vertex line '" + line + "'");
      mesh.verts.insert(mesh.verts.end(), {x, y, z});
    } else if (tag == "f") {
      std::uint32_t a, b, c;
      if (!(ss >> a >> b >> c) || a == 0 || b == 0 || c == 0)
        throw FormatError("mesh: bad face line '" + line + "'");
      mesh.faces.push_back({a - 1, b - 1, c - 1});
    } else if (!tag.empty()) {
      throw FormatError("mesh: unknown record '" + tag + "'");
    }
  }
  for (const auto& f : mesh.faces)
    for (auto i : f)
      if (i >= mesh.verts.size() / 3) throw FormatError("mesh: face index out of range");
  return mesh;
}

}  // namespace immf::bench
