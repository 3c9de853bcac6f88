#pragma once

#include "msad/core.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace msad {

struct TestSample {
    SampleRef ref;
    /// Mask (image modalities) or point-label file (point cloud) per modality, when annotated.
    std::array<std::optional<std::filesystem::path>, 3> ground_truth{};

    const std::optional<std::filesystem::path>& gt(Modality m) const { return ground_truth[static_cast<int>(m)]; }
};

struct CategoryIndex {
    std::string name;
    std::vector<SampleRef> train;
    std::vector<TestSample> test;
};

struct DatasetIndex {
    std::filesystem::path root;
    std::vector<CategoryIndex> categories;

    const CategoryIndex& category(const std::string& name) const;
};

struct ScanOptions {
    /// Modalities whose directories must exist under every category.
    ModalitySubset modalities{{Modality::Rgb, Modality::Infrared, Modality::Pointcloud}};
    /// Ground-truth directory, sibling of train/ and test/: <Modality>/<gt_dir>/<defect>/<id>.<ext>.
    std::string gt_dir = "GT";
    std::vector<std::string> image_extensions{".png", ".ppm", ".pgm"};
    std::vector<std::string> cloud_extensions{".txt", ".xyz", ".ply"};
    std::vector<std::string> point_label_extensions{".txt"};
    /// Restrict to these categories (empty = all).
    std::vector<std::string> categories;
};

/// Indexes <root>/<category>/{RGB,Infrared,Pointcloud}/{train,test/<defect>,GT/<defect>}.
/// Ordering is lexicographic and independent of filesystem enumeration order.
DatasetIndex scan_dataset(const std::filesystem::path& root, const ScanOptions& options = {});

/// Modality labels of a test sample: a modality is positive iff its annotation exists and
/// marks at least one pixel/point, negative when it is scanned but unannotated, absent
/// otherwise. Annotations of modalities outside the scan selection still count, so the
/// object label does not depend on which modalities are evaluated.
ModalityLabels modality_labels(const TestSample& sample);

}  // namespace msad
