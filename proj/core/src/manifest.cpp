#include "cimllm/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cimllm/error.hpp"
#include "cimllm/nifti.hpp"

namespace cimllm {

std::string_view to_string(Sex s) noexcept { return s == Sex::Male ? "male" : "female"; }
std::string_view to_string(IdhStatus s) noexcept { return s == IdhStatus::Mutant ? "mutant" : "wildtype"; }
std::string_view to_string(Subtype s) noexcept {
  switch (s) {
    case Subtype::Astrocytoma: return "astro";
    case Subtype::Oligodendroglioma: return "oligo";
    case Subtype::Glioblastoma: return "gbm";
  }
  return "";
}

namespace {

std::string trim_lower(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw Error(ErrorCode::ManifestFormat, "unterminated quote");
  cells.push_back(trim(cur));
  return cells;
}

std::filesystem::path resolve(const std::string& cell, const std::filesystem::path& base) {
  if (cell.empty()) return {};
  std::filesystem::path p(cell);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

const std::vector<std::string>& expected_columns() {
  static const std::vector<std::string> cols = {"subject_id", "flair", "t1",  "t1ce", "t2",  "seg",    "cnwm",
                                                "vent_left",  "vent_right", "age", "sex",  "idh", "subtype"};
  return cols;
}

}  // namespace

std::optional<Sex> parse_sex(std::string_view cell) {
  const auto v = trim_lower(cell);
  if (v.empty()) return std::nullopt;
  if (v == "m" || v == "male") return Sex::Male;
  if (v == "f" || v == "female") return Sex::Female;
  throw Error(ErrorCode::ManifestFormat, "unrecognised sex value '" + std::string(cell) + "'");
}

std::optional<IdhStatus> parse_idh(std::string_view cell) {
  const auto v = trim_lower(cell);
  if (v.empty()) return std::nullopt;
  if (v == "mutant") return IdhStatus::Mutant;
  if (v == "wildtype") return IdhStatus::Wildtype;
  throw Error(ErrorCode::ManifestFormat, "unrecognised idh value '" + std::string(cell) + "'");
}

std::optional<Subtype> parse_subtype(std::string_view cell) {
  const auto v = trim_lower(cell);
  if (v.empty()) return std::nullopt;
  if (v == "astro" || v == "astrocytoma") return Subtype::Astrocytoma;
  if (v == "oligo" || v == "oligodendroglioma") return Subtype::Oligodendroglioma;
  if (v == "gbm" || v == "glioblastoma") return Subtype::Glioblastoma;
  throw Error(ErrorCode::ManifestFormat, "unrecognised subtype value '" + std::string(cell) + "'");
}

std::vector<ManifestRow> parse_manifest(std::string_view csv, const std::filesystem::path& base_dir) {
  std::vector<std::string> lines;
  {
    std::istringstream in{std::string(csv)};
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) continue;
      lines.push_back(line);
    }
  }
  if (lines.empty()) throw Error(ErrorCode::ManifestFormat, "manifest is empty");

  auto header = split_csv_line(lines.front());
  for (auto& h : header) h = trim_lower(h);
  const auto& expected = expected_columns();
  const bool with_cohort = header.size() == expected.size() + 1 && header.back() == "cohort";
  if (!std::equal(expected.begin(), expected.end(), header.begin(), header.begin() + std::min(header.size(), expected.size())) ||
      (header.size() != expected.size() && !with_cohort)) {
    throw Error(ErrorCode::ManifestFormat, "unexpected manifest header; want " + std::string(kManifestHeader));
  }

  std::vector<ManifestRow> rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto cells = split_csv_line(lines[ln]);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::ManifestFormat,
                  "line " + std::to_string(ln + 1) + " has " + std::to_string(cells.size()) + " cells");
    }
    ManifestRow r;
    r.subject_id = cells[0];
    if (r.subject_id.empty()) throw Error(ErrorCode::ManifestFormat, "empty subject_id on line " + std::to_string(ln + 1));
    r.flair = resolve(cells[1], base_dir);
    r.t1 = resolve(cells[2], base_dir);
    r.t1ce = resolve(cells[3], base_dir);
    r.t2 = resolve(cells[4], base_dir);
    r.seg = resolve(cells[5], base_dir);
    r.cnwm = resolve(cells[6], base_dir);
    r.vent_left = resolve(cells[7], base_dir);
    r.vent_right = resolve(cells[8], base_dir);
    if (!cells[9].empty()) {
      double age = 0.0;
      const auto* first = cells[9].data();
      const auto* last = first + cells[9].size();
      const auto res = std::from_chars(first, last, age);
      if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(age) || age < 0) {
        throw Error(ErrorCode::ManifestFormat, "bad age '" + cells[9] + "'");
      }
      r.age_years = age;
    }
    r.sex = parse_sex(cells[10]);
    r.idh = parse_idh(cells[11]);
    r.subtype = parse_subtype(cells[12]);
    if (with_cohort && !cells[13].empty()) r.cohort = cells[13];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

std::string format_manifest(const std::vector<ManifestRow>& rows, bool with_cohort) {
  auto cell = [](std::string_view v) {
    if (v.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(v);
    std::string q = "\"";
    for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::ostringstream out;
  out << kManifestHeader << (with_cohort ? ",cohort" : "") << "\n";
  for (const auto& r : rows) {
    out << cell(r.subject_id);
    for (const auto* p : {&r.flair, &r.t1, &r.t1ce, &r.t2, &r.seg, &r.cnwm, &r.vent_left, &r.vent_right}) {
      out << ',' << cell(p->string());
    }
    out << ',';
    if (r.age_years) out << *r.age_years;
    out << ',';
    if (r.sex) out << (*r.sex == Sex::Male ? "M" : "F");
    out << ',';
    if (r.idh) out << to_string(*r.idh);
    out << ',';
    if (r.subtype) out << to_string(*r.subtype);
    if (with_cohort) out << ',' << cell(r.cohort);
    out << "\n";
  }
  return out.str();
}

AtlasSet load_atlases(const std::vector<std::pair<std::string, std::filesystem::path>>& sources) {
  AtlasSet out;
  for (const auto& [name, path] : sources) {
    out[name] = std::make_shared<const VoxelGrid>(nifti::load_nifti(path));
  }
  return out;
}

BinaryMask mask_from_grid(const VoxelGrid& grid) {
  std::vector<std::uint8_t> bits(grid.size());
  for (std::size_t v = 0; v < grid.size(); ++v) bits[v] = grid[v] != 0.0;
  return BinaryMask(grid.geometry(), std::move(bits));
}

namespace {

void check_geometry(const Geometry& reference, const Geometry& g, const std::string& what) {
  if (!reference.matches(g)) {
    throw Error(ErrorCode::GeometryMismatch, what + " geometry differs from the segmentation grid");
  }
}

std::optional<VoxelGrid> load_optional(const std::filesystem::path& p) {
  if (p.empty()) return std::nullopt;
  return nifti::load_nifti(p);
}

}  // namespace

void validate_bundle(const SubjectBundle& b) {
  const Geometry& ref = b.geometry();
  if (!b.flair && !b.t2) {
    throw Error(ErrorCode::MissingRequiredModality, "subject " + b.subject_id + " has neither FLAIR nor T2");
  }
  const std::pair<const char*, const std::optional<VoxelGrid>*> seqs[] = {
      {"flair", &b.flair}, {"t1", &b.t1}, {"t1ce", &b.t1ce}, {"t2", &b.t2}};
  for (const auto& [name, grid] : seqs) {
    if (*grid) check_geometry(ref, (*grid)->geometry(), name);
  }
  for (const auto& [name, atlas] : b.atlases) check_geometry(ref, atlas->geometry(), "atlas " + name);
  if (b.cnwm_mask) check_geometry(ref, b.cnwm_mask->geometry(), "cnwm");
  if (b.ventricle_masks) {
    check_geometry(ref, b.ventricle_masks->first.geometry(), "vent_left");
    check_geometry(ref, b.ventricle_masks->second.geometry(), "vent_right");
  }
}

SubjectBundle assemble_bundle(const ManifestRow& row, const AtlasSet& atlases) {
  if (row.seg.empty()) {
    throw Error(ErrorCode::MissingRequiredModality, "subject " + row.subject_id + " has no segmentation");
  }
  SubjectBundle b;
  b.subject_id = row.subject_id;
  b.segmentation = SegmentationMap::from_grid(nifti::load_nifti(row.seg));
  b.flair = load_optional(row.flair);
  b.t1 = load_optional(row.t1);
  b.t1ce = load_optional(row.t1ce);
  b.t2 = load_optional(row.t2);
  if (!row.cnwm.empty()) b.cnwm_mask = mask_from_grid(nifti::load_nifti(row.cnwm));
  if (!row.vent_left.empty() || !row.vent_right.empty()) {
    if (row.vent_left.empty() || row.vent_right.empty()) {
      throw Error(ErrorCode::MissingRequiredModality, "ventricle masks must be given as a left/right pair");
    }
    b.ventricle_masks.emplace(mask_from_grid(nifti::load_nifti(row.vent_left)),
                              mask_from_grid(nifti::load_nifti(row.vent_right)));
  }
  const Geometry& ref = b.geometry();
  for (const auto& [name, atlas] : atlases) {
    if (atlas->geometry().matches(ref)) {
      b.atlases[name] = atlas;
    } else {
      b.atlases[name] = std::make_shared<const VoxelGrid>(nifti::pad_or_crop(*atlas, ref));
    }
  }
  b.age_years = row.age_years;
  b.sex = row.sex;
  b.idh_label = row.idh;
  b.subtype = row.subtype;
  validate_bundle(b);
  return b;
}

}  // namespace cimllm
