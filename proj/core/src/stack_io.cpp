#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "focuslab/camera.hpp"
#include "focuslab/error.hpp"

namespace focuslab::camera {

void save_stack(const FocalStack& stack, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / kManifestName);
  if (!manifest) throw FormatError("cannot write " + (dir / kManifestName).string());
  manifest << kManifestHeader << '\n';
  char name[32];
  char focus[40];
  for (std::size_t i = 0; i < stack.size(); ++i) {
    std::snprintf(name, sizeof name, "frame_%03zu.pgm", i);
    std::snprintf(focus, sizeof focus, "%.17g", stack.position(i));
    write_pgm(dir / name, stack.frame(i));
    manifest << i << '\t' << focus << '\t' << name << '\n';
  }
  write_pgm(dir / kMaskName, stack.object_mask());
}

FocalStack load_stack(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestName;
  std::ifstream manifest(manifest_path);
  if (!manifest) throw FormatError("missing manifest " + manifest_path.string());

  std::string line;
  if (!std::getline(manifest, line)) throw FormatError(manifest_path.string() + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader)
    throw FormatError(manifest_path.string() + ":1: expected header 'index<TAB>focus_dpt<TAB>filename'");

  std::vector<Image> frames;
  std::vector<double> positions;
  int line_no = 1;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = manifest_path.string() + ":" + std::to_string(line_no) + ": ";

    std::istringstream row(line);
    std::string index_field, focus_field, file_field, extra;
    if (!std::getline(row, index_field, '\t') || !std::getline(row, focus_field, '\t') ||
        !std::getline(row, file_field, '\t') || std::getline(row, extra, '\t'))
      throw FormatError(where + "expected three tab-separated columns");

    std::size_t used = 0;
    long index = 0;
    double focus = 0.0;
    try {
      index = std::stol(index_field, &used);
      if (used != index_field.size()) throw std::invalid_argument(index_field);
      focus = std::stod(focus_field, &used);
      if (used != focus_field.size()) throw std::invalid_argument(focus_field);
    } catch (const std::exception&) {
      throw FormatError(where + "unparseable index or focus_dpt");
    }
    if (index != static_cast<long>(frames.size()))
      throw FormatError(where + "index column must count up from 0");
    if (!positions.empty() && !(focus > positions.back()))
      throw FormatError(where + "focus_dpt column must be strictly increasing");

    const auto frame_path = dir / file_field;
    if (!std::filesystem::exists(frame_path)) throw FormatError(where + "missing frame file " + file_field);
    Image frame = read_pgm(frame_path);
    if (!frames.empty() && !frame.same_shape(frames.front()))
      throw FormatError(where + "frame " + file_field + " differs in size from the first frame");
    frames.push_back(std::move(frame));
    positions.push_back(focus);
  }
  if (frames.size() < 2) throw FormatError(manifest_path.string() + ": a focal stack needs at least two frames");

  Image mask;
  if (std::filesystem::exists(dir / kMaskName)) {
    mask = read_pgm(dir / kMaskName);
    if (!mask.same_shape(frames.front())) throw FormatError((dir / kMaskName).string() + ": mask differs in size from frames");
    if (std::all_of(mask.pixels().begin(), mask.pixels().end(), [](double v) { return v == 0.0; }))
      throw FormatError((dir / kMaskName).string() + ": mask is empty");
  } else {
    mask = Image(frames.front().width(), frames.front().height(), 1.0);
  }
  return FocalStack(std::move(frames), std::move(positions), std::move(mask));
}

} // namespace focuslab::camera
