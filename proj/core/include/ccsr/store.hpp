// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "ccsr/image.hpp"

namespace ccsr {

/// Handle to a persisted image. storage_path is relative to the store root.
struct ImageRef {
  std::string content_id;
  int width = 0;
  int height = 0;
  std::string storage_path;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

/// Content-addressed image store rooted at a run directory.
///
/// Objects live at `objects/<content_id>.png`; `materialize` additionally
/// places a copy at a caller-chosen layout path such as
/// `images/<prompt_id>/<index>.png`. All writes are temp-file-and-rename, so
/// concurrent writers of the same object are harmless.
class ArtifactStore {
 public:
  explicit ArtifactStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  ImageRef put(const Image& image);
  Image load(const ImageRef& ref) const;
  Image load(const std::string& content_id) const;

  bool contains(const std::string& content_id) const;
  std::filesystem::path object_path(const std::string& content_id) const;

  /// Copies the object to `relative_path` under the root and returns a ref
  /// pointing there.
  ImageRef materialize(const ImageRef& ref,
                       const std::filesystem::path& relative_path) const;

  /// Brings an encoded PNG from elsewhere into this store; the content id is
  /// verified against the decoded pixels.
  ImageRef import_object(const std::filesystem::path& png_path,
                         const std::string& expected_content_id);

 private:
  std::filesystem::path root_;
};

}  // namespace ccsr
