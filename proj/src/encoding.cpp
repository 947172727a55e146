#include "esncl/encoding.hpp"

#include <fstream>
#include <stdexcept>

namespace esncl {

EncodedDataset encode_dataset(const Reservoir& r, const SequenceDataset& ds, Pooling pooling) {
    EncodedDataset out;
    out.num_classes = ds.num_classes;
    out.labels.reserve(ds.patterns.size());
    std::vector<Eigen::MatrixXd> seqs;
    seqs.reserve(ds.patterns.size());
    for (const auto& p : ds.patterns) {
        seqs.push_back(p.seq);
        out.labels.push_back(p.label);
    }
    out.features = r.encode_batch(seqs, pooling);
    return out;
}

std::vector<EncodedExperience> encode_experiences(const Reservoir& r,
                                                  const std::vector<Experience>& exps,
                                                  Pooling pooling) {
    std::vector<EncodedExperience> out;
    out.reserve(exps.size());
    for (const auto& e : exps) {
        EncodedExperience ee;
        ee.id = e.id;
        ee.class_set = e.class_set;
        ee.train = encode_dataset(r, e.train, pooling);
        ee.test = encode_dataset(r, e.test, pooling);
        out.push_back(std::move(ee));
    }
    return out;
}

namespace {

constexpr char kCacheMagic[8] = {'E', 'S', 'N', 'F', 'E', 'A', '0', '1'};

void write_dataset(std::ofstream& os, const EncodedDataset& d) {
    std::int64_t rows = d.features.rows(), cols = d.features.cols(), nc = d.num_classes;
    os.write(reinterpret_cast<const char*>(&rows), 8);
    os.write(reinterpret_cast<const char*>(&cols), 8);
    os.write(reinterpret_cast<const char*>(&nc), 8);
    os.write(reinterpret_cast<const char*>(d.features.data()),
             static_cast<std::streamsize>(8 * d.features.size()));
    std::vector<std::int32_t> lab(d.labels.begin(), d.labels.end());
    os.write(reinterpret_cast<const char*>(lab.data()),
             static_cast<std::streamsize>(4 * lab.size()));
}

bool read_dataset(std::ifstream& is, EncodedDataset& d) {
    std::int64_t rows, cols, nc;
    if (!is.read(reinterpret_cast<char*>(&rows), 8)) return false;
    if (!is.read(reinterpret_cast<char*>(&cols), 8)) return false;
    if (!is.read(reinterpret_cast<char*>(&nc), 8)) return false;
    d.num_classes = static_cast<int>(nc);
    d.features.resize(rows, cols);
    if (!is.read(reinterpret_cast<char*>(d.features.data()),
                 static_cast<std::streamsize>(8 * d.features.size())))
        return false;
    std::vector<std::int32_t> lab(static_cast<std::size_t>(cols));
    if (!is.read(reinterpret_cast<char*>(lab.data()), static_cast<std::streamsize>(4 * lab.size())))
        return false;
    d.labels.assign(lab.begin(), lab.end());
    return true;
}

} // namespace

void save_encoded_cache(const std::string& path, const std::vector<EncodedExperience>& exps) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("feature cache: cannot write " + path);
    os.write(kCacheMagic, 8);
    std::int64_t n = static_cast<std::int64_t>(exps.size());
    os.write(reinterpret_cast<const char*>(&n), 8);
    for (const auto& e : exps) {
        std::int64_t id = e.id, ncls = static_cast<std::int64_t>(e.class_set.size());
        os.write(reinterpret_cast<const char*>(&id), 8);
        os.write(reinterpret_cast<const char*>(&ncls), 8);
        std::vector<std::int32_t> cls(e.class_set.begin(), e.class_set.end());
        os.write(reinterpret_cast<const char*>(cls.data()),
                 static_cast<std::streamsize>(4 * cls.size()));
        write_dataset(os, e.train);
        write_dataset(os, e.test);
    }
}

bool load_encoded_cache(const std::string& path, std::vector<EncodedExperience>& out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return false;
    char magic[8];
    if (!is.read(magic, 8) || std::string_view(magic, 8) != std::string_view(kCacheMagic, 8))
        return false;
    std::int64_t n;
    if (!is.read(reinterpret_cast<char*>(&n), 8)) return false;
    std::vector<EncodedExperience> exps(static_cast<std::size_t>(n));
    for (auto& e : exps) {
        std::int64_t id, ncls;
        if (!is.read(reinterpret_cast<char*>(&id), 8)) return false;
        if (!is.read(reinterpret_cast<char*>(&ncls), 8)) return false;
        e.id = static_cast<int>(id);
        std::vector<std::int32_t> cls(static_cast<std::size_t>(ncls));
        if (!is.read(reinterpret_cast<char*>(cls.data()),
                     static_cast<std::streamsize>(4 * cls.size())))
            return false;
        e.class_set.assign(cls.begin(), cls.end());
        if (!read_dataset(is, e.train)) return false;
        if (!read_dataset(is, e.test)) return false;
    }
    out = std::move(exps);
    return true;
}

} // namespace esncl
