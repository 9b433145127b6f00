#include "dna/synthdata.hpp"

#include "dna/error.hpp"
#include "dna/rng.hpp"
#include "dna/text_format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

namespace dna {

namespace {

constexpr std::string_view kMagic = "DNA-DS v1";

std::size_t test_count(std::size_t n) {
    const auto t = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
    return std::clamp<std::size_t>(t, 1, n - 1);
}

struct Drawn {
    std::vector<double> x;
    int coarse;
    int fine;
};

Split assemble(std::vector<Drawn>& rows, std::size_t first_id, std::size_t dim) {
    Split s;
    s.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        s.ids.push_back(first_id + r);
        s.coarse.push_back(rows[r].coarse);
        s.fine.push_back(rows[r].fine);
        for (std::size_t d = 0; d < dim; ++d) {
            s.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = rows[r].x[d];
        }
    }
    return s;
}

}  // namespace

std::size_t HierarchySpec::class_size(std::size_t c) const {
    if (num_coarse <= 1 || coarse_imbalance == 1.0) return samples_per_fine;
    const double frac = static_cast<double>(c) / static_cast<double>(num_coarse - 1);
    const double scaled = static_cast<double>(samples_per_fine) * std::pow(coarse_imbalance, -frac);
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(scaled)));
}

void HierarchySpec::validate() const {
    if (num_coarse < 1) throw ConfigError("num_coarse must be >= 1");
    if (fines_per_coarse < 1) throw ConfigError("fines_per_coarse must be >= 1");
    if (samples_per_fine < 2) {
        throw ConfigError("samples_per_fine must be >= 2 so every fine class reaches both splits");
    }
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be nonnegative");
    if (!(fine_spread < coarse_spread)) {
        throw ConfigError("fine_spread must be < coarse_spread (fine clusters nest inside coarse clusters)");
    }
    if (!(noise_sigma < fine_spread)) {
        throw ConfigError("noise_sigma must be < fine_spread (fine classes must be recoverable)");
    }
    if (!(coarse_imbalance >= 1.0)) throw ConfigError("coarse_imbalance must be >= 1");
}

bool Split::has_fine_labels() const {
    return !fine.empty() && std::none_of(fine.begin(), fine.end(), [](int f) { return f == kUnknownFine; });
}

Dataset generate(const HierarchySpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t dim = spec.input_dim;

    std::vector<std::vector<double>> coarse_centers(spec.num_coarse, std::vector<double>(dim));
    for (auto& c : coarse_centers)
        for (auto& v : c) v = spec.coarse_spread * rng.normal();

    std::vector<std::vector<double>> fine_centers(spec.num_fine(), std::vector<double>(dim));
    for (std::size_t f = 0; f < spec.num_fine(); ++f) {
        const auto& parent = coarse_centers[f / spec.fines_per_coarse];
        for (std::size_t d = 0; d < dim; ++d) fine_centers[f][d] = parent[d] + spec.fine_spread * rng.normal();
    }

    std::vector<Drawn> train, test;
    for (std::size_t f = 0; f < spec.num_fine(); ++f) {
        const std::size_t coarse = f / spec.fines_per_coarse;
        const std::size_t n = spec.class_size(coarse);
        const std::size_t n_test = test_count(n);
        for (std::size_t s = 0; s < n; ++s) {
            Drawn row{std::vector<double>(dim), static_cast<int>(coarse), static_cast<int>(f)};
            for (std::size_t d = 0; d < dim; ++d) row.x[d] = fine_centers[f][d] + spec.noise_sigma * rng.normal();
            (s < n - n_test ? train : test).push_back(std::move(row));
        }
    }
    rng.shuffle(train);
    rng.shuffle(test);

    Dataset ds;
    ds.dim = dim;
    ds.num_coarse = spec.num_coarse;
    ds.num_fine = spec.num_fine();
    ds.train = assemble(train, 0, dim);
    ds.test = assemble(test, train.size(), dim);
    return ds;
}

void write_dataset(const Dataset& ds, std::ostream& out) {
    std::string line;
    line.append(kMagic)
        .append(" dim=").append(std::to_string(ds.dim))
        .append(" coarse=").append(std::to_string(ds.num_coarse))
        .append(" fine=").append(std::to_string(ds.num_fine))
        .append(" train=").append(std::to_string(ds.train.size()))
        .append("\n");
    out << line;
    for (const Split* split : {&ds.train, &ds.test}) {
        for (std::size_t r = 0; r < split->size(); ++r) {
            line.clear();
            line.append(std::to_string(split->ids[r])).append(",")
                .append(std::to_string(split->coarse[r])).append(",")
                .append(std::to_string(split->fine[r]));
            for (Eigen::Index d = 0; d < split->x.cols(); ++d) {
                line.push_back(',');
                text::append_double(line, split->x(static_cast<Eigen::Index>(r), d));
            }
            line.push_back('\n');
            out << line;
        }
    }
    if (!out) throw StructuralError("failed writing dataset");
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StructuralError("cannot open " + path.string() + " for writing");
    write_dataset(ds, out);
}

Dataset read_dataset(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw ParseError(1, "empty dataset file");
    const auto tokens = text::split(text::trim(header), ' ');
    if (tokens.size() < 5 || tokens[0] != "DNA-DS" || tokens[1] != "v1") {
        throw ParseError(1, "expected header 'DNA-DS v1 dim=<d> coarse=<M> fine=<K>'");
    }
    std::map<std::string, std::size_t, std::less<>> fields;
    for (std::size_t t = 2; t < tokens.size(); ++t) {
        const auto eq = tokens[t].find('=');
        if (eq == std::string_view::npos) throw ParseError(1, "malformed header field '" + std::string(tokens[t]) + "'");
        fields[std::string(tokens[t].substr(0, eq))] = text::parse_count(tokens[t].substr(eq + 1), 1);
    }
    for (const char* key : {"dim", "coarse", "fine"}) {
        if (!fields.contains(key)) throw ParseError(1, std::string("header is missing '") + key + "='");
    }

    Dataset ds;
    ds.dim = fields["dim"];
    ds.num_coarse = fields["coarse"];
    ds.num_fine = fields["fine"];
    if (ds.dim == 0 || ds.num_coarse == 0) throw ParseError(1, "dim and coarse must be positive");

    std::vector<Drawn> rows;
    std::vector<std::size_t> ids;
    std::set<std::size_t> seen;
    std::map<int, int> parent_of_fine;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = text::trim(line);
        if (body.empty()) continue;
        const auto cols = text::split(body, ',');
        if (cols.size() != 3 + ds.dim) {
            throw StructuralError("line " + std::to_string(lineno) + ": row has " +
                                  std::to_string(cols.size() < 3 ? 0 : cols.size() - 3) + " values, expected dim=" +
                                  std::to_string(ds.dim));
        }
        const std::size_t id = text::parse_count(cols[0], lineno);
        const long long coarse = text::parse_int(cols[1], lineno);
        const long long fine = text::parse_int(cols[2], lineno);
        if (coarse < 0 || static_cast<std::size_t>(coarse) >= ds.num_coarse) {
            throw StructuralError("line " + std::to_string(lineno) + ": coarse label out of range");
        }
        if (fine < kUnknownFine || (fine >= 0 && static_cast<std::size_t>(fine) >= ds.num_fine)) {
            throw StructuralError("line " + std::to_string(lineno) + ": fine label out of range");
        }
        if (!seen.insert(id).second) {
            throw StructuralError("line " + std::to_string(lineno) + ": duplicate sample id " + std::to_string(id));
        }
        if (fine != kUnknownFine) {
            const auto [it, inserted] = parent_of_fine.emplace(static_cast<int>(fine), static_cast<int>(coarse));
            if (!inserted && it->second != coarse) {
                throw StructuralError("line " + std::to_string(lineno) + ": fine class " + std::to_string(fine) +
                                      " appears under two coarse classes");
            }
        }
        Drawn row{std::vector<double>(ds.dim), static_cast<int>(coarse), static_cast<int>(fine)};
        for (std::size_t d = 0; d < ds.dim; ++d) {
            row.x[d] = text::parse_double(cols[3 + d], lineno);
            if (!std::isfinite(row.x[d])) throw ParseError(lineno, "non-finite feature value");
        }
        rows.push_back(std::move(row));
        ids.push_back(id);
    }

    const std::size_t n_train = fields.contains("train") ? fields["train"] : rows.size();
    if (n_train > rows.size()) throw StructuralError("header declares more training rows than the file holds");

    std::vector<Drawn> train(std::make_move_iterator(rows.begin()),
                             std::make_move_iterator(rows.begin() + static_cast<std::ptrdiff_t>(n_train)));
    std::vector<Drawn> test(std::make_move_iterator(rows.begin() + static_cast<std::ptrdiff_t>(n_train)),
                            std::make_move_iterator(rows.end()));
    ds.train = assemble(train, 0, ds.dim);
    ds.test = assemble(test, 0, ds.dim);
    std::copy(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train), ds.train.ids.begin());
    std::copy(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end(), ds.test.ids.begin());
    return ds;
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StructuralError("cannot open " + path.string());
    return read_dataset(in);
}

}  // namespace dna
