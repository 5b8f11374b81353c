#include "candlecast/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

#include "binary_io.hpp"

namespace candlecast::nn {

namespace {

constexpr char kWeightsMagic[4] = {'C', 'F', 'W', '1'};
constexpr char kTensorMagic[4] = {'C', 'F', 'T', '1'};

void check_magic(std::istream& in, const char (&magic)[4], const std::string& what) {
    char got[4];
    if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0)
        throw IoError("bad magic: not a " + what + " stream");
}

void put_tensor_body(std::ostream& out, const Tensor& t) {
    io::put_u64(out, t.rank());
    for (std::size_t d = 0; d < t.rank(); ++d) io::put_u64(out, t.dim(d));
    for (std::size_t i = 0; i < t.size(); ++i) io::put_f32(out, t[i]);
}

Tensor get_tensor_body(std::istream& in, const std::string& what) {
    const std::uint64_t rank = io::get_u64(in, what + " rank");
    if (rank > 8) throw IoError(what + ": implausible rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
        d = io::get_u64(in, what + " dims");
        if (d == 0 || n > (std::size_t(1) << 32) / std::max<std::size_t>(d, 1))
            throw IoError(what + ": implausible shape");
        n *= d;
    }
    std::vector<float> data(n);
    for (auto& v : data) v = io::get_f32(in, what + " data");
    return Tensor(shape, std::move(data));
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

} // namespace

void write_weights(const Network& net, std::ostream& out) {
    out.write(kWeightsMagic, 4);
    for (const auto& p : net.parameters()) {
        io::put_u64(out, p.name.size());
        out.write(p.name.data(), std::streamsize(p.name.size()));
        put_tensor_body(out, p.value);
    }
    if (!out) throw IoError("weight write failed");
}

void read_weights(Network& net, std::istream& in) {
    check_magic(in, kWeightsMagic, "weight checkpoint");

    std::map<std::string, Tensor> records;
    while (in.peek() != std::char_traits<char>::eof()) {
        const std::uint64_t name_len = io::get_u64(in, "weight name length");
        if (name_len > 4096) throw IoError("implausible weight name length");
        std::string name = io::get_string(in, name_len, "weight name");
        Tensor value = get_tensor_body(in, "weight '" + name + "'");
        if (!records.emplace(std::move(name), std::move(value)).second)
            throw IoError("duplicate weight record");
    }

    const auto& params = net.parameters();
    if (records.size() != params.size())
        throw IoError("weight count " + std::to_string(records.size()) +
                      " does not match network (" + std::to_string(params.size()) + ")");
    for (const auto& p : params) {
        auto it = records.find(p.name);
        if (it == records.end()) throw IoError("missing weight record '" + p.name + "'");
        if (it->second.shape() != p.value.shape())
            throw IoError("weight '" + p.name + "' has shape " +
                          shape_string(it->second.shape()) + ", network expects " +
                          shape_string(p.value.shape()));
    }
    // all verified, now assign
    for (auto& p : net.parameters()) p.value = std::move(records.at(p.name));
}

void save_weights(const Network& net, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_weights(net, out);
    if (!out.flush()) throw IoError("failed writing " + path.string());
}

void load_weights(Network& net, const std::filesystem::path& path) {
    auto in = open_in(path);
    read_weights(net, in);
}

void write_tensor(const Tensor& t, std::ostream& out) {
    out.write(kTensorMagic, 4);
    put_tensor_body(out, t);
    if (!out) throw IoError("tensor write failed");
}

Tensor read_tensor(std::istream& in) {
    check_magic(in, kTensorMagic, "tensor");
    return get_tensor_body(in, "tensor");
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_tensor(t, out);
    if (!out.flush()) throw IoError("failed writing " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_tensor(in);
}

} // namespace candlecast::nn
