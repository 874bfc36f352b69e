// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccsr/store.hpp"

#include <fmt/format.h>

#include "ccsr/digest.hpp"
#include "ccsr/errors.hpp"

namespace ccsr {

namespace fs = std::filesystem;

ArtifactStore::ArtifactStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "objects");
}

fs::path ArtifactStore::object_path(const std::string& content_id) const {
  return root_ / "objects" / (content_id + ".png");
}

bool ArtifactStore::contains(const std::string& content_id) const {
  return fs::exists(object_path(content_id));
}

ImageRef ArtifactStore::put(const Image& image) {
  ImageRef ref{content_id(image), image.width, image.height, {}};
  ref.storage_path = (fs::path("objects") / (ref.content_id + ".png")).generic_string();
  const auto path = object_path(ref.content_id);
  if (!fs::exists(path)) {
    const auto png = encode_png(image);
    write_atomic(path, std::string_view(reinterpret_cast<const char*>(png.data()),
                                        png.size()));
  }
  return ref;
}

Image ArtifactStore::load(const std::string& content_id) const {
  const auto path = object_path(content_id);
  if (!fs::exists(path)) {
    throw IoError(fmt::format("image {} is not in the store", content_id));
  }
  return decode_png(read_binary(path));
}

Image ArtifactStore::load(const ImageRef& ref) const {
  return load(ref.content_id);
}

ImageRef ArtifactStore::materialize(const ImageRef& ref,
                                    const fs::path& relative_path) const {
  const auto source = object_path(ref.content_id);
  if (!fs::exists(source)) {
    throw IoError(fmt::format("image {} is not in the store", ref.content_id));
  }
  const auto target = root_ / relative_path;
  fs::create_directories(target.parent_path());
  fs::copy_file(source, target, fs::copy_options::overwrite_existing);
  ImageRef out = ref;
  out.storage_path = relative_path.generic_string();
  return out;
}

ImageRef ArtifactStore::import_object(const fs::path& png_path,
                                      const std::string& expected_content_id) {
  const auto bytes = read_binary(png_path);
  const Image image = decode_png(bytes);
  const auto actual = content_id(image);
  if (actual != expected_content_id) {
    throw IntegrityError(fmt::format("{} holds image {}, expected {}",
                                     png_path.string(), actual,
                                     expected_content_id));
  }
  const auto target = object_path(actual);
  if (!fs::exists(target)) {
    write_atomic(target, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                          bytes.size()));
  }
  return ImageRef{actual, image.width, image.height,
                  (fs::path("objects") / (actual + ".png")).generic_string()};
}

}  // namespace ccsr
