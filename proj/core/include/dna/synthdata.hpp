#pragma once

#include "dna/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dna {

inline constexpr int kUnknownFine = -1;

/// Two-level Gaussian hierarchy: coarse centers, fine centers nested around
/// them, samples scattered around fine centers.
struct HierarchySpec {
    std::size_t num_coarse = 10;
    std::size_t fines_per_coarse = 3;
    std::size_t samples_per_fine = 60;
    std::size_t input_dim = 32;
    double coarse_spread = 3.0;
    double fine_spread = 1.0;
    double noise_sigma = 0.7;
    // Ratio between the per-fine sample counts of the first and last coarse
    // class; sizes decay geometrically in between. 1 means balanced.
    double coarse_imbalance = 1.0;
    std::uint64_t seed = 1;

    std::size_t num_fine() const { return num_coarse * fines_per_coarse; }
    // Samples drawn for every fine class of coarse class `c`.
    std::size_t class_size(std::size_t c) const;

    // Throws ConfigError naming the first violated constraint.
    void validate() const;
};

/// One split of a dataset, stored column-wise. Row r of `x` belongs to
/// sample `ids[r]`.
struct Split {
    std::vector<std::size_t> ids;
    Matrix x;
    std::vector<int> coarse;
    std::vector<int> fine;

    std::size_t size() const { return ids.size(); }
    bool has_fine_labels() const;

    friend bool operator==(const Split& a, const Split& b) {
        return a.ids == b.ids && a.coarse == b.coarse && a.fine == b.fine &&
               a.x.rows() == b.x.rows() && a.x.cols() == b.x.cols() && a.x == b.x;
    }
};

struct Dataset {
    std::size_t dim = 0;
    std::size_t num_coarse = 0;
    std::size_t num_fine = 0;
    Split train;
    Split test;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// The part of a split a training procedure may see: inputs and coarse labels.
/// Fine labels are deliberately not reachable from here.
class CoarseView {
public:
    explicit CoarseView(const Split& split, std::size_t num_coarse)
        : x_(&split.x), coarse_(split.coarse), num_coarse_(num_coarse) {}

    const Matrix& x() const { return *x_; }
    std::span<const int> coarse() const { return coarse_; }
    std::size_t size() const { return coarse_.size(); }
    std::size_t num_coarse() const { return num_coarse_; }

private:
    const Matrix* x_;
    std::span<const int> coarse_;
    std::size_t num_coarse_;
};

Dataset generate(const HierarchySpec& spec);

void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

// Stream variants used by the file functions; exposed for tests.
void write_dataset(const Dataset& ds, std::ostream& out);
Dataset read_dataset(std::istream& in);

}  // namespace dna
