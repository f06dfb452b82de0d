#include "mlg/data/annotations.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mlg/error.hpp"

namespace mlg {

Mask rasterize_boxes(int height, int width, const std::vector<Box>& boxes) {
  Mask m(height, width);
  for (const auto& b : boxes) {
    if (b.w <= 0 || b.h <= 0) throw ValidationError("box has non-positive extent");
    if (b.x < 0 || b.y < 0 || b.x + b.w > width || b.y + b.h > height)
      throw ValidationError("box (" + std::to_string(b.x) + "," + std::to_string(b.y) + "," + std::to_string(b.w) +
                            "," + std::to_string(b.h) + ") outside " + std::to_string(height) + "x" +
                            std::to_string(width) + " image");
    for (int y = b.y; y < b.y + b.h; ++y)
      for (int x = b.x; x < b.x + b.w; ++x) m.at(y, x) = 1;
  }
  return m;
}

namespace {

void merge_into(MaskMap& out, std::pair<std::string, std::string> key, Mask m) {
  auto [it, fresh] = out.try_emplace(std::move(key), std::move(m));
  if (fresh) return;
  Mask& dst = it->second;
  for (std::size_t i = 0; i < dst.bits.size(); ++i) dst.bits[i] |= m.bits[i];
}

}  // namespace

MaskMap parse_annotations(const std::string& text, const ImageSizes& sizes, const std::filesystem::path& root) {
  MaskMap out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("pathology") ||
        !j["pathology"].is_string())
      throw ParseError("annotation needs string \"id\" and \"pathology\"", line_no);
    const std::string id = j["id"];
    const std::string pathology = j["pathology"];
    auto size = sizes.find(id);
    if (size == sizes.end()) throw ValidationError("line " + std::to_string(line_no) + ": unknown id '" + id + "'");
    const auto [h, w] = size->second;

    Mask m;
    if (j.contains("boxes")) {
      if (!j["boxes"].is_array()) throw ParseError("\"boxes\" must be an array", line_no);
      std::vector<Box> boxes;
      for (const auto& b : j["boxes"]) {
        if (!b.is_array() || b.size() != 4) throw ParseError("box must be [x,y,w,h]", line_no);
        for (const auto& v : b)
          if (!v.is_number_integer()) throw ParseError("box coordinates must be integers", line_no);
        boxes.push_back({b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()});
      }
      try {
        m = rasterize_boxes(h, w, boxes);
      } catch (const ValidationError& e) {
        throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
      }
    } else if (j.contains("mask")) {
      if (!j["mask"].is_string()) throw ParseError("\"mask\" must be a path string", line_no);
      m = read_mask_png(root / j["mask"].get<std::string>());
      if (m.height != h || m.width != w)
        throw ValidationError("line " + std::to_string(line_no) + ": mask size differs from image '" + id + "'");
    } else {
      throw ParseError("annotation needs \"boxes\" or \"mask\"", line_no);
    }
    merge_into(out, {id, pathology}, std::move(m));
  }
  return out;
}

MaskMap load_annotations(const std::filesystem::path& path, const ImageSizes& sizes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open annotations '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_annotations(ss.str(), sizes, path.parent_path());
}

}  // namespace mlg
