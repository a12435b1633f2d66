#include "cwc/serialize.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cwc/errors.hpp"

namespace cwc {

namespace {

constexpr std::uint32_t kVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
    put_u32(out, std::bit_cast<std::uint32_t>(f));
}

bool valid_utf8(const std::uint8_t* s, std::size_t n) {
    std::size_t i = 0;
    while (i < n) {
        const std::uint8_t c = s[i];
        std::size_t len;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xe0) == 0xc0) {
            len = 2;
            cp = c & 0x1f;
        } else if ((c & 0xf0) == 0xe0) {
            len = 3;
            cp = c & 0x0f;
        } else if ((c & 0xf8) == 0xf0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > n) return false;
        for (std::size_t j = 1; j < len; ++j) {
            if ((s[i + j] & 0xc0) != 0x80) return false;
            cp = (cp << 6) | (s[i + j] & 0x3f);
        }
        if (len == 2 && cp < 0x80) return false;  // overlong
        if (len == 3 && (cp < 0x800 || (cp >= 0xd800 && cp <= 0xdfff))) return false;
        if (len == 4 && (cp < 0x10000 || cp > 0x10ffff)) return false;
        i += len;
    }
    return true;
}

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }

    std::uint8_t u8() {
        need(1, "u8 field");
        return bytes_[pos_++];
    }

    std::uint16_t u16() {
        need(2, "u16 field");
        const std::uint16_t v =
            static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4, "u32 field");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    const std::uint8_t* raw(std::size_t n, const char* what) {
        need(n, what);
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    void expect_end() {
        if (pos_ != bytes_.size())
            throw ParseError("stream holds " + std::to_string(bytes_.size() - pos_) +
                                 " trailing bytes",
                             pos_);
    }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n)
            throw ParseError(std::string("stream truncated reading ") + what, pos_);
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void expect_magic(ByteReader& r, const char magic[4]) {
    const std::size_t at = r.offset();
    const std::uint8_t* m = r.raw(4, "magic");
    if (std::memcmp(m, magic, 4) != 0)
        throw ParseError(std::string("bad magic, expected \"") + std::string(magic, 4) + "\"", at);
}

void expect_version(ByteReader& r) {
    const std::size_t at = r.offset();
    const std::uint32_t v = r.u32();
    if (v != kVersion)
        throw ParseError("unsupported version " + std::to_string(v), at);
}

void put_tensor_header(std::vector<std::uint8_t>& out, const std::string& name,
                       const std::vector<std::size_t>& shape) {
    if (name.empty() || name.size() > 0xffff)
        throw IoError("tensor name length " + std::to_string(name.size()) + " not serializable");
    if (shape.empty() || shape.size() > 0xff)
        throw IoError("tensor rank " + std::to_string(shape.size()) + " not serializable");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(shape.size()));
    for (std::size_t d : shape) {
        if (d > 0xffffffffull) throw IoError("tensor dimension too large for u32");
        put_u32(out, static_cast<std::uint32_t>(d));
    }
    out.push_back(0);  // dtype FP32
}

struct TensorHeader {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t elems = 0;
};

TensorHeader read_tensor_header(ByteReader& r) {
    TensorHeader h;
    const std::uint16_t name_len = r.u16();
    if (name_len == 0) throw ParseError("empty tensor name", r.offset() - 2);
    const std::size_t name_at = r.offset();
    const std::uint8_t* name = r.raw(name_len, "tensor name");
    if (!valid_utf8(name, name_len)) throw ParseError("tensor name is not UTF-8", name_at);
    h.name.assign(reinterpret_cast<const char*>(name), name_len);
    const std::uint8_t ndims = r.u8();
    if (ndims == 0) throw ParseError("tensor rank 0", r.offset() - 1);
    h.shape.reserve(ndims);
    for (std::size_t i = 0; i < ndims; ++i) {
        const std::size_t at = r.offset();
        const std::uint32_t d = r.u32();
        if (d == 0) throw ParseError("tensor dimension 0", at);
        h.shape.push_back(d);
    }
    const std::size_t dtype_at = r.offset();
    const std::uint8_t dtype = r.u8();
    if (dtype != 0)
        throw ParseError("unsupported dtype " + std::to_string(dtype), dtype_at);
    std::size_t n = 1;
    for (std::size_t d : h.shape) {
        if (n > (std::size_t{1} << 40) / d)
            throw ParseError("tensor element count implausibly large", dtype_at);
        n *= d;
    }
    h.elems = n;
    return h;
}

std::vector<float> read_f32_payload(ByteReader& r, std::size_t n, const std::string& name) {
    const std::size_t at = r.offset();
    const std::uint8_t* raw = r.raw(n * 4, "FP32 payload");
    std::vector<float> vals(n);
    std::memcpy(vals.data(), raw, n * 4);  // little-endian host assumed for bulk copy
    if constexpr (std::endian::native != std::endian::little) {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t u;
            std::memcpy(&u, raw + 4 * i, 4);
            u = __builtin_bswap32(u);
            vals[i] = std::bit_cast<float>(u);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(vals[i]))
            throw ParseError("tensor '" + name + "' holds a non-finite value", at + 4 * i);
    return vals;
}

Codebook read_codebook(ByteReader& r, std::size_t len, const std::string& what) {
    const std::size_t at = r.offset();
    if (len == 0 || len > 256) throw ParseError(what + " length out of [1,256]", at);
    std::vector<float> centroids(len);
    for (std::size_t i = 0; i < len; ++i) centroids[i] = r.f32();
    for (std::size_t i = 0; i < len; ++i) {
        if (!std::isfinite(centroids[i]))
            throw ParseError(what + " holds a non-finite centroid", at + 4 * i);
        if (i > 0 && !(centroids[i - 1] < centroids[i]))
            throw ParseError(what + " centroids not strictly increasing", at + 4 * i);
    }
    return Codebook(std::move(centroids));
}

Model assemble_model(std::vector<TensorHeader> headers, std::vector<TensorStorage> storage,
                     ClusteringMode mode, std::optional<Codebook> shared) {
    std::vector<std::string> names;
    std::vector<std::vector<std::size_t>> shapes;
    std::vector<const Tensor*> dense_vals;
    for (std::size_t i = 0; i < headers.size(); ++i) {
        names.push_back(headers[i].name);
        shapes.push_back(headers[i].shape);
        dense_vals.push_back(is_dense(storage[i]) ? &std::get<Tensor>(storage[i]) : nullptr);
    }
    Model m;
    m.graph = graph_from_tensors(names, shapes, dense_vals);
    m.mode = mode;
    m.shared_codebook = std::move(shared);
    m.storage.resize(storage.size());
    for (std::size_t i = 0; i < storage.size(); ++i)
        m.storage[m.graph.index_of(names[i])] = std::move(storage[i]);
    m.validate();
    return m;
}

}  // namespace

std::vector<std::uint8_t> save_dense(const Model& m) {
    if (!m.all_dense()) throw IoError("save_dense: model holds clustered tensors");
    m.validate();
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'T', 'D', 'M', '1'});
    put_u32(out, kVersion);
    if (m.storage.size() > 0xffffffffull) throw IoError("too many tensors");
    put_u32(out, static_cast<std::uint32_t>(m.storage.size()));
    for (std::size_t i = 0; i < m.storage.size(); ++i) {
        const TensorSpec& spec = m.graph.tensors()[i];
        const Tensor& t = std::get<Tensor>(m.storage[i]);
        put_tensor_header(out, spec.name, t.shape());
        for (float f : t.data()) put_f32(out, f);
    }
    return out;
}

Model load_dense(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    expect_magic(r, "TDM1");
    expect_version(r);
    const std::uint32_t count = r.u32();
    std::vector<TensorHeader> headers;
    std::vector<TensorStorage> storage;
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorHeader h = read_tensor_header(r);
        std::vector<float> vals = read_f32_payload(r, h.elems, h.name);
        storage.emplace_back(Tensor(h.shape, std::move(vals)));
        headers.push_back(std::move(h));
    }
    r.expect_end();
    return assemble_model(std::move(headers), std::move(storage), ClusteringMode::PerLayer,
                          std::nullopt);
}

std::vector<std::uint8_t> save_clustered(const Model& m) {
    m.validate();
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'T', 'C', 'M', '1'});
    put_u32(out, kVersion);
    const bool entire = m.mode == ClusteringMode::EntireModel;
    out.push_back(entire ? 0 : 1);
    if (entire) {
        if (!m.shared_codebook) throw IoError("entire-model file needs a shared codebook");
        put_u16(out, static_cast<std::uint16_t>(m.shared_codebook->size()));
        for (float c : m.shared_codebook->centroids()) put_f32(out, c);
    }
    if (m.storage.size() > 0xffffffffull) throw IoError("too many tensors");
    put_u32(out, static_cast<std::uint32_t>(m.storage.size()));
    for (std::size_t i = 0; i < m.storage.size(); ++i) {
        const TensorSpec& spec = m.graph.tensors()[i];
        if (is_dense(m.storage[i])) {
            const Tensor& t = std::get<Tensor>(m.storage[i]);
            put_tensor_header(out, spec.name, t.shape());
            out.push_back(0);  // storage: dense
            for (float f : t.data()) put_f32(out, f);
        } else {
            const ClusteredTensor& ct = std::get<ClusteredTensor>(m.storage[i]);
            put_tensor_header(out, spec.name, ct.shape);
            out.push_back(1);  // storage: clustered
            if (entire) {
                if (ct.own_codebook)
                    throw IoError("entire-model file cannot carry per-tensor codebooks");
            } else {
                if (!ct.own_codebook)
                    throw IoError("per-layer file needs a codebook on tensor '" + ct.name + "'");
                put_u16(out, static_cast<std::uint16_t>(ct.own_codebook->size()));
                for (float c : ct.own_codebook->centroids()) put_f32(out, c);
            }
            out.insert(out.end(), ct.indices.begin(), ct.indices.end());
        }
    }
    return out;
}

Model load_clustered(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    expect_magic(r, "TCM1");
    expect_version(r);
    const std::size_t mode_at = r.offset();
    const std::uint8_t mode_byte = r.u8();
    if (mode_byte > 1) throw ParseError("mode byte must be 0 or 1", mode_at);
    const ClusteringMode mode =
        mode_byte == 0 ? ClusteringMode::EntireModel : ClusteringMode::PerLayer;
    std::optional<Codebook> shared;
    if (mode == ClusteringMode::EntireModel) {
        const std::uint16_t len = r.u16();
        shared = read_codebook(r, len, "shared codebook");
    }
    const std::uint32_t count = r.u32();
    std::vector<TensorHeader> headers;
    std::vector<TensorStorage> storage;
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorHeader h = read_tensor_header(r);
        const std::size_t storage_at = r.offset();
        const std::uint8_t st = r.u8();
        if (st > 1) throw ParseError("storage byte must be 0 or 1", storage_at);
        if (st == 0) {
            std::vector<float> vals = read_f32_payload(r, h.elems, h.name);
            storage.emplace_back(Tensor(h.shape, std::move(vals)));
        } else {
            ClusteredTensor ct;
            ct.name = h.name;
            ct.shape = h.shape;
            std::size_t cb_len;
            if (mode == ClusteringMode::PerLayer) {
                const std::uint16_t len = r.u16();
                ct.own_codebook = read_codebook(r, len, "codebook of '" + h.name + "'");
                cb_len = ct.own_codebook->size();
            } else {
                cb_len = shared->size();
            }
            const std::uint8_t* ix = r.raw(h.elems, "index payload");
            ct.indices.assign(ix, ix + h.elems);
            for (std::size_t j = 0; j < h.elems; ++j)
                if (ct.indices[j] >= cb_len)
                    throw CorruptionError("tensor '" + h.name + "' index " +
                                          std::to_string(ct.indices[j]) +
                                          " out of range for codebook of " +
                                          std::to_string(cb_len));
            storage.emplace_back(std::move(ct));
        }
        headers.push_back(std::move(h));
    }
    r.expect_end();
    return assemble_model(std::move(headers), std::move(storage), mode, std::move(shared));
}

Model load_model_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "TCM1", 4) == 0)
        return load_clustered(bytes);
    return load_dense(bytes);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (f.bad()) throw IoError("read failed on '" + path + "'");
    return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed on '" + path + "'");
}

Model load_model_file(const std::string& path) {
    return load_model_bytes(read_file(path));
}

}  // namespace cwc
