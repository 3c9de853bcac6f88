#include "msad/dataset.hpp"

#include "msad/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

namespace msad {
namespace fs = std::filesystem;
namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool has_extension(const fs::path& p, const std::vector<std::string>& exts) {
    auto ext = lower(p.extension().string());
    return std::find(exts.begin(), exts.end(), ext) != exts.end();
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// id -> file for one directory; duplicate stems are an error.
std::map<std::string, fs::path> files_by_id(const fs::path& dir, const std::vector<std::string>& exts) {
    std::map<std::string, fs::path> out;
    for (const auto& f : sorted_entries(dir, false)) {
        if (!has_extension(f, exts)) continue;
        auto id = f.stem().string();
        if (!out.emplace(id, f).second)
            throw DataError("duplicate sample id '" + id + "' in " + dir.string());
    }
    return out;
}

}  // namespace

const CategoryIndex& DatasetIndex::category(const std::string& name) const {
    for (const auto& c : categories)
        if (c.name == name) return c;
    throw DataError("category '" + name + "' not in dataset " + root.string());
}

DatasetIndex scan_dataset(const fs::path& root, const ScanOptions& options) {
    if (!fs::is_directory(root)) throw DataError("dataset root not found: " + root.string());
    DatasetIndex index;
    index.root = root;
    for (const auto& cat_dir : sorted_entries(root, true)) {
        std::string name = cat_dir.filename().string();
        if (!options.categories.empty() &&
            std::find(options.categories.begin(), options.categories.end(), name) == options.categories.end())
            continue;

        CategoryIndex cat;
        cat.name = name;
        std::map<std::string, SampleRef> train;
        std::map<std::string, TestSample> test;  // key: defect/id

        for (auto m : options.modalities.members()) {
            fs::path mdir = cat_dir / std::string(modality_name(m));
            if (!fs::is_directory(mdir))
                throw DataError("category '" + name + "' is missing modality directory " + mdir.string());
            const auto& exts = is_image_modality(m) ? options.image_extensions : options.cloud_extensions;
            const auto& gt_exts = is_image_modality(m) ? options.image_extensions : options.point_label_extensions;
            int slot = static_cast<int>(m);

            auto train_files = files_by_id(mdir / "train", exts);
            if (train_files.empty())
                throw DataError("no training samples for " + name + "/" + std::string(modality_name(m)));
            for (auto& [id, path] : train_files) {
                auto& ref = train[id];
                ref.category = name;
                ref.split = Split::Train;
                ref.defect = std::string(kGoodDefect);
                ref.id = id;
                ref.paths[slot] = path;
            }

            for (const auto& defect_dir : sorted_entries(mdir / "test", true)) {
                std::string defect = defect_dir.filename().string();
                auto gts = files_by_id(mdir / options.gt_dir / defect, gt_exts);
                for (auto& [id, path] : files_by_id(defect_dir, exts)) {
                    auto& sample = test[defect + "/" + id];
                    sample.ref.category = name;
                    sample.ref.split = Split::Test;
                    sample.ref.defect = defect;
                    sample.ref.id = id;
                    sample.ref.paths[slot] = path;
                    if (defect != kGoodDefect) {
                        auto it = gts.find(id);
                        if (it != gts.end()) sample.ground_truth[slot] = it->second;
                    }
                }
            }
        }

        // Annotations of unselected modalities still define the object label.
        for (auto m : kAllModalities) {
            if (options.modalities.contains(m)) continue;
            fs::path gt_root = cat_dir / std::string(modality_name(m)) / options.gt_dir;
            if (!fs::is_directory(gt_root)) continue;
            const auto& gt_exts = is_image_modality(m) ? options.image_extensions : options.point_label_extensions;
            for (auto& [key, sample] : test) {
                if (sample.ref.defect == kGoodDefect) continue;
                auto gts = files_by_id(gt_root / sample.ref.defect, gt_exts);
                if (auto it = gts.find(sample.ref.id); it != gts.end())
                    sample.ground_truth[static_cast<int>(m)] = it->second;
            }
        }

        for (auto& [id, ref] : train) cat.train.push_back(std::move(ref));
        for (auto& [key, sample] : test) {
            if (sample.ref.defect != kGoodDefect &&
                std::none_of(sample.ground_truth.begin(), sample.ground_truth.end(),
                             [](const auto& g) { return g.has_value(); }))
                throw DataError("anomalous test sample " + name + "/" + key + " has no ground truth in any modality");
            cat.test.push_back(std::move(sample));
        }
        index.categories.push_back(std::move(cat));
    }
    if (index.categories.empty()) throw DataError("no categories found under " + root.string());
    return index;
}

ModalityLabels modality_labels(const TestSample& sample) {
    ModalityLabels labels;
    for (auto m : kAllModalities) {
        const auto& gt = sample.gt(m);
        if (!gt) {
            if (sample.ref.has(m)) labels[m] = false;
            continue;
        }
        if (is_image_modality(m)) {
            auto mask = load_mask(*gt);
            labels[m] = std::any_of(mask.pixels.begin(), mask.pixels.end(), [](std::uint8_t v) { return v != 0; });
        } else {
            std::ifstream in(*gt);
            if (!in) throw DataError("cannot open point labels " + gt->string());
            std::string token;
            labels[m] = static_cast<bool>(in >> token);
        }
    }
    return labels;
}

}  // namespace msad
