#include "fedsup/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedsup/binio.hpp"
#include "fedsup/rng.hpp"

namespace fedsup {

namespace {

void draw_open_eye(Tensor& img, int h, int w, int cy, int cx) {
    const double a = 0.38 * w;  // horizontal semi-axis
    const double b = 0.24 * h;  // vertical semi-axis
    const double pupil_r = 0.11 * std::min(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double e = (dx * dx) / (a * a) + (dy * dy) / (b * b);
            float& px = img.data[static_cast<std::size_t>(y) * w + x];
            if (std::fabs(e - 1.0) < 0.28)
                px = 0.95f;  // eyelid outline
            if (dx * dx + dy * dy <= pupil_r * pupil_r)
                px = 0.05f;  // pupil
        }
}

void draw_closed_eye(Tensor& img, int h, int w, int cy, int cx) {
    const double a = 0.38 * w;
    const double curve = 0.10 * h;  // lid sag at the corners
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dx = x - cx;
            if (std::fabs(dx) > a) continue;
            const double lid_y = cy + curve * (dx * dx) / (a * a);
            if (std::fabs(y - lid_y) < 1.2)
                img.data[static_cast<std::size_t>(y) * w + x] = 0.05f;
        }
}

}  // namespace

LabeledDataset generate_blink_dataset(const SyntheticBlinkSpec& spec) {
    if (spec.height < 12 || spec.width < 12)
        throw std::invalid_argument("generate_blink_dataset: image sides must be >= 12");
    if (spec.num_samples < 0)
        throw std::invalid_argument("generate_blink_dataset: negative sample count");
    if (spec.noise_std < 0.0f)
        throw std::invalid_argument("generate_blink_dataset: negative noise std");

    LabeledDataset ds;
    ds.class_names = {"open", "closed"};
    ds.images.reserve(static_cast<std::size_t>(spec.num_samples));
    ds.labels.reserve(static_cast<std::size_t>(spec.num_samples));

    RngStream root(spec.seed);
    const int h = spec.height, w = spec.width;
    for (int i = 0; i < spec.num_samples; ++i) {
        RngStream rng = root.derive(static_cast<std::uint64_t>(i));
        const int label = i % 2 == 0 ? kClassOpen : kClassClosed;  // balanced up to 1

        int cy = h / 2, cx = w / 2;
        if (spec.jitter_px > 0) {
            cy += static_cast<int>(rng.next_below(2 * spec.jitter_px + 1)) - spec.jitter_px;
            cx += static_cast<int>(rng.next_below(2 * spec.jitter_px + 1)) - spec.jitter_px;
        }

        Tensor img = Tensor::zeros({h, w, 1});
        std::fill(img.data.begin(), img.data.end(), 0.45f);
        if (label == kClassOpen)
            draw_open_eye(img, h, w, cy, cx);
        else
            draw_closed_eye(img, h, w, cy, cx);

        if (spec.noise_std > 0.0f)
            for (auto& px : img.data)
                px = std::clamp(px + spec.noise_std * rng.next_normal(), 0.0f, 1.0f);

        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

Partition partition_unbalanced(std::size_t dataset_size, const PartitionSpec& spec) {
    if (spec.num_parts < 1)
        throw std::invalid_argument("partition_unbalanced: need at least one part");
    if (spec.mu < 1.0)
        throw std::invalid_argument("partition_unbalanced: mu must be >= 1");
    if (spec.sigma < 0.0)
        throw std::invalid_argument("partition_unbalanced: sigma must be >= 0");
    if (dataset_size < static_cast<std::size_t>(spec.num_parts))
        throw std::invalid_argument("partition_unbalanced: dataset smaller than part count");

    const double stddev = spec.sigma_is_variance ? std::sqrt(spec.sigma) : spec.sigma;
    RngStream rng(spec.seed);

    std::vector<long long> sizes(static_cast<std::size_t>(spec.num_parts));
    for (auto& s : sizes) {
        const double draw = spec.mu + stddev * static_cast<double>(rng.next_normal());
        s = std::max(1ll, std::llround(draw));
    }

    // proportional shrink until the total fits, never below 1 per part
    long long total = std::accumulate(sizes.begin(), sizes.end(), 0ll);
    const long long capacity = static_cast<long long>(dataset_size);
    while (total > capacity) {
        const double scale = static_cast<double>(capacity) / static_cast<double>(total);
        long long new_total = 0;
        bool changed = false;
        for (auto& s : sizes) {
            const long long shrunk = std::max(1ll, static_cast<long long>(
                                                       std::floor(static_cast<double>(s) * scale)));
            changed = changed || shrunk != s;
            s = shrunk;
            new_total += shrunk;
        }
        if (!changed) {
            // every part already at 1 except rounding stragglers; trim largest first
            while (new_total > capacity) {
                auto it = std::max_element(sizes.begin(), sizes.end());
                if (*it <= 1) break;
                --*it;
                --new_total;
            }
        }
        total = new_total;
    }

    std::vector<int> order(dataset_size);
    std::iota(order.begin(), order.end(), 0);
    RngStream shuffle_rng = rng.derive(1);
    shuffle_rng.shuffle(order);

    Partition part;
    part.parts.resize(static_cast<std::size_t>(spec.num_parts));
    std::size_t next = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        part.parts[k].assign(order.begin() + static_cast<std::ptrdiff_t>(next),
                             order.begin() + static_cast<std::ptrdiff_t>(next + sizes[k]));
        next += static_cast<std::size_t>(sizes[k]);
    }
    return part;
}

Partition partition_unbalanced(const LabeledDataset& dataset, const PartitionSpec& spec) {
    return partition_unbalanced(dataset.size(), spec);
}

namespace {
constexpr char kDatasetMagic[4] = {'F', 'S', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;
}  // namespace

void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path) {
    if (dataset.images.size() != dataset.labels.size())
        throw std::invalid_argument("save_dataset: images/labels size mismatch");
    int h = 0, w = 0, c = 0;
    if (!dataset.images.empty()) {
        const auto& s = dataset.images.front().shape;
        if (s.size() != 3) throw std::invalid_argument("save_dataset: images must be (H,W,C)");
        h = s[0];
        w = s[1];
        c = s[2];
    }
    const std::uint32_t classes = static_cast<std::uint32_t>(
        dataset.class_names.empty()
            ? (dataset.labels.empty()
                   ? 0
                   : 1 + *std::max_element(dataset.labels.begin(), dataset.labels.end()))
            : dataset.class_names.size());

    BinWriter out;
    out.magic(kDatasetMagic);
    out.u32(kDatasetVersion);
    out.u32(static_cast<std::uint32_t>(dataset.images.size()));
    out.u32(static_cast<std::uint32_t>(h));
    out.u32(static_cast<std::uint32_t>(w));
    out.u32(static_cast<std::uint32_t>(c));
    out.u32(classes);
    for (std::size_t i = 0; i < dataset.images.size(); ++i) {
        const Tensor& img = dataset.images[i];
        if (img.shape != std::vector<int>{h, w, c})
            throw std::invalid_argument("save_dataset: inconsistent image shapes");
        out.u32(static_cast<std::uint32_t>(dataset.labels[i]));
        out.f32_array(img.data.data(), img.data.size());
    }
    out.write_file(path);
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    BinReader in = BinReader::from_file(path);
    in.expect_magic(kDatasetMagic, "dataset header");
    const std::uint32_t version = in.u32("dataset version");
    if (version != kDatasetVersion)
        throw FormatError("unsupported dataset version " + std::to_string(version),
                          in.offset() - 4);
    const std::uint32_t count = in.u32("sample count");
    const std::uint32_t h = in.u32("height");
    const std::uint32_t w = in.u32("width");
    const std::uint32_t c = in.u32("channels");
    const std::uint32_t classes = in.u32("class count");
    if (count > 0 && (h == 0 || w == 0 || c == 0))
        throw FormatError("zero image dimension", in.offset() - 12);
    if (h > 1u << 16 || w > 1u << 16 || c > 1u << 8)
        throw FormatError("implausible image dimension", in.offset() - 12);

    LabeledDataset ds;
    ds.class_names.reserve(classes);
    for (std::uint32_t k = 0; k < classes; ++k)
        ds.class_names.push_back("class_" + std::to_string(k));
    ds.images.reserve(count);
    ds.labels.reserve(count);
    const std::size_t pixels = static_cast<std::size_t>(h) * w * c;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t label = in.u32("sample label");
        if (classes > 0 && label >= classes)
            throw FormatError("label " + std::to_string(label) + " out of range", in.offset() - 4);
        Tensor img = Tensor::zeros({static_cast<int>(h), static_cast<int>(w), static_cast<int>(c)});
        in.f32_array(img.data.data(), pixels, "sample pixels");
        ds.images.push_back(std::move(img));
        ds.labels.push_back(static_cast<int>(label));
    }
    in.expect_end("dataset payload");
    return ds;
}

}  // namespace fedsup
