#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mlg/data/image.hpp"

namespace mlg {

struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

// Key is (report id, pathology).
using MaskMap = std::map<std::pair<std::string, std::string>, Mask>;
using ImageSizes = std::map<std::string, std::pair<int, int>>;  // id -> (height, width)

// Fills each box into a height×width mask (union). Throws ValidationError for
// boxes that leave the image or have non-positive extent.
Mask rasterize_boxes(int height, int width, const std::vector<Box>& boxes);

// Records: {"id","pathology","boxes":[[x,y,w,h],...]} or {"id","pathology","mask":png}.
// Mask paths resolve against the annotation file's directory. Several records
// for the same key are merged by union.
MaskMap load_annotations(const std::filesystem::path& path, const ImageSizes& sizes);
MaskMap parse_annotations(const std::string& text, const ImageSizes& sizes, const std::filesystem::path& root = {});

}  // namespace mlg
