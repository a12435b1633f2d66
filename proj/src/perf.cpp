#include "cwc/perf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "cwc/errors.hpp"
#include "cwc/serialize.hpp"

namespace cwc {

const char* to_string(OpKind k) {
    switch (k) {
        case OpKind::Matmul: return "matmul";
        case OpKind::Softmax: return "softmax";
        case OpKind::Norm: return "norm";
        case OpKind::Gelu: return "gelu";
        case OpKind::Add: return "add";
        case OpKind::Other: return "other";
    }
    return "other";
}

std::uint64_t WorkloadProfile::matmul_flops() const {
    std::uint64_t f = 0;
    for (const auto& row : per_layer)
        if (row.kind == OpKind::Matmul) f += row.flops;
    return f;
}

namespace {

// Builds rows and keeps the totals consistent with them by construction.
class ProfileBuilder {
public:
    explicit ProfileBuilder(const Model& m, std::uint64_t batch) : m_(m), batch_(batch) {}

    // Parameter bytes for one read of the named tensor; clustered tensors
    // cost one byte per scalar (their table is charged separately).
    std::uint64_t param_read_bytes(const std::string& name) {
        const TensorStorage& s = m_.entry(name);
        const std::size_t n = is_dense(s) ? std::get<Tensor>(s).size()
                                          : std::get<ClusteredTensor>(s).indices.size();
        if (is_dense(s)) return 4ull * n;
        lut_ += batch_ * n;
        return 1ull * n;
    }

    std::uint64_t own_codebook_bytes(const std::string& name) {
        const TensorStorage& s = m_.entry(name);
        if (is_dense(s)) return 0;
        const ClusteredTensor& ct = std::get<ClusteredTensor>(s);
        return ct.own_codebook ? ct.own_codebook->byte_size() : 0;
    }

    void row(std::string name, OpKind kind, std::uint64_t flops_per_inference,
             std::uint64_t act_elems_per_inference, std::uint64_t param_bytes_once = 0) {
        LayerCost c;
        c.name = std::move(name);
        c.kind = kind;
        c.flops = batch_ * flops_per_inference;
        const std::uint64_t act = 4ull * batch_ * act_elems_per_inference;
        const std::uint64_t par = batch_ * param_bytes_once;
        c.bytes = act + par;
        p_.flops += c.flops;
        p_.activation_bytes += act;
        p_.param_bytes += par;
        p_.per_layer.push_back(std::move(c));
    }

    // matmul row of x[mxk] * w[kxn] through the named weight tensor
    void matmul_row(const std::string& op_name, const std::string& weight, std::uint64_t m,
                    std::uint64_t k, std::uint64_t n) {
        row(op_name, OpKind::Matmul, 2 * m * k * n, m * n,
            param_read_bytes(weight) + own_codebook_bytes(weight));
    }

    WorkloadProfile finish(std::uint64_t lut_from_rows) {
        p_.lut_accesses = lut_from_rows;
        return std::move(p_);
    }

    std::uint64_t lut() const { return lut_; }

    const Model& m_;
    std::uint64_t batch_;
    WorkloadProfile p_;
    std::uint64_t lut_ = 0;
};

std::uint64_t tensor_bytes_dense(const Model& m, const std::string& name) {
    return 4ull * Tensor::checked_elem_count(m.graph.spec(name).shape);
}

WorkloadProfile profile_vit(const Model& m, std::uint64_t batch) {
    const VitHyperParams& hp = m.graph.vit_params();
    const std::uint64_t s = hp.seq_len(), d = hp.dim, np = hp.num_patches(),
                        pd = hp.patch_dim(), md = hp.mlp_dim(), heads = hp.heads,
                        cls = hp.classes;
    ProfileBuilder b(m, batch);

    b.row("patchify", OpKind::Other, 0, np * pd);
    b.matmul_row("patch_embed.matmul", "patch_embed.weight", np, pd, d);
    b.row("patch_embed.bias", OpKind::Add, np * d, np * d, tensor_bytes_dense(m, "patch_embed.bias"));
    b.row("tokens.assemble", OpKind::Add, s * d, s * d,
          tensor_bytes_dense(m, "cls_token") + tensor_bytes_dense(m, "pos_embed"));

    for (std::size_t blk = 0; blk < hp.depth; ++blk) {
        const std::string p = "blocks." + std::to_string(blk) + ".";
        b.row(p + "norm1", OpKind::Norm, 8 * s * d, s * d,
              tensor_bytes_dense(m, p + "norm1.gamma") + tensor_bytes_dense(m, p + "norm1.beta"));
        b.matmul_row(p + "qkv.matmul", p + "qkv.weight", s, d, 3 * d);
        b.row(p + "qkv.bias", OpKind::Add, s * 3 * d, s * 3 * d,
              tensor_bytes_dense(m, p + "qkv.bias"));
        b.row(p + "attn.scores", OpKind::Matmul, 2 * s * s * d, heads * s * s);
        b.row(p + "attn.scale", OpKind::Other, heads * s * s, heads * s * s);
        b.row(p + "attn.softmax", OpKind::Softmax, 5 * heads * s * s, heads * s * s);
        b.row(p + "attn.context", OpKind::Matmul, 2 * s * s * d, s * d);
        b.matmul_row(p + "proj.matmul", p + "proj.weight", s, d, d);
        b.row(p + "proj.bias", OpKind::Add, s * d, s * d, tensor_bytes_dense(m, p + "proj.bias"));
        b.row(p + "residual1", OpKind::Add, s * d, s * d);
        b.row(p + "norm2", OpKind::Norm, 8 * s * d, s * d,
              tensor_bytes_dense(m, p + "norm2.gamma") + tensor_bytes_dense(m, p + "norm2.beta"));
        b.matmul_row(p + "mlp.fc1.matmul", p + "mlp.fc1.weight", s, d, md);
        b.row(p + "mlp.fc1.bias", OpKind::Add, s * md, s * md,
              tensor_bytes_dense(m, p + "mlp.fc1.bias"));
        b.row(p + "mlp.gelu", OpKind::Gelu, 10 * s * md, s * md);
        b.matmul_row(p + "mlp.fc2.matmul", p + "mlp.fc2.weight", s, md, d);
        b.row(p + "mlp.fc2.bias", OpKind::Add, s * d, s * d,
              tensor_bytes_dense(m, p + "mlp.fc2.bias"));
        b.row(p + "residual2", OpKind::Add, s * d, s * d);
    }

    b.row("norm", OpKind::Norm, 8 * s * d, s * d,
          tensor_bytes_dense(m, "norm.gamma") + tensor_bytes_dense(m, "norm.beta"));
    b.row("cls.gather", OpKind::Other, 0, d);
    b.matmul_row("head.matmul", "head.weight", 1, d, cls);
    b.row("head.bias", OpKind::Add, cls, cls, tensor_bytes_dense(m, "head.bias"));

    if (m.shared_codebook)
        b.row("shared_codebook", OpKind::Other, 0, 0, m.shared_codebook->byte_size());
    return b.finish(b.lut());
}

// Raw containers: every rank-2 tensor models one [batch x k] * [k x n]
// linear layer; rank-1 tensors are parameter payload only.
WorkloadProfile profile_raw(const Model& m, std::uint64_t batch) {
    ProfileBuilder b(m, batch);
    for (const TensorSpec& spec : m.graph.tensors()) {
        if (spec.shape.size() == 2) {
            b.matmul_row(spec.name + ".matmul", spec.name, 1, spec.shape[0], spec.shape[1]);
        } else {
            b.row(spec.name + ".params", OpKind::Other, 0, 0,
                  b.param_read_bytes(spec.name) + b.own_codebook_bytes(spec.name));
        }
    }
    if (m.shared_codebook)
        b.row("shared_codebook", OpKind::Other, 0, 0, m.shared_codebook->byte_size());
    return b.finish(b.lut());
}

}  // namespace

WorkloadProfile profile_model(const Model& m, std::uint64_t batch) {
    if (batch == 0) throw ConfigError("profile: batch must be >= 1");
    if (m.graph.kind() == ModelGraph::Kind::Vit) return profile_vit(m, batch);
    return profile_raw(m, batch);
}

void PlatformConfig::validate() const {
    if (name.empty()) throw ConfigError("platform config needs a name");
    const double v[] = {mem_bandwidth, compute_rate, e_dram, e_flop, e_lut, p_static};
    for (double x : v)
        if (!(x > 0.0) || !std::isfinite(x))
            throw ConfigError("platform '" + name + "': all constants must be positive finite");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& key, const std::string& origin) {
    double out = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last)
        throw ParseError(origin + ": value of '" + key + "' is not a number: '" + text + "'", 0);
    return out;
}

}  // namespace

PlatformConfig parse_platform_config(const std::string& text, const std::string& origin) {
    PlatformConfig cfg;
    bool seen[7] = {};
    const char* keys[7] = {"name",     "bandwidth_bytes_per_s", "flops_per_s", "e_dram_j_per_byte",
                           "e_flop_j", "e_lut_j",               "p_static_w"};
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(origin + ": expected 'key = value', got '" + line + "'", 0);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        int ki = -1;
        for (int i = 0; i < 7; ++i)
            if (key == keys[i]) ki = i;
        if (ki < 0) throw ParseError(origin + ": unknown key '" + key + "'", 0);
        if (seen[ki]) throw ParseError(origin + ": duplicate key '" + key + "'", 0);
        seen[ki] = true;
        switch (ki) {
            case 0: cfg.name = value; break;
            case 1: cfg.mem_bandwidth = parse_number(value, key, origin); break;
            case 2: cfg.compute_rate = parse_number(value, key, origin); break;
            case 3: cfg.e_dram = parse_number(value, key, origin); break;
            case 4: cfg.e_flop = parse_number(value, key, origin); break;
            case 5: cfg.e_lut = parse_number(value, key, origin); break;
            case 6: cfg.p_static = parse_number(value, key, origin); break;
        }
    }
    for (int i = 0; i < 7; ++i)
        if (!seen[i])
            throw ParseError(origin + ": missing key '" + std::string(keys[i]) + "'", 0);
    cfg.validate();
    return cfg;
}

PlatformConfig load_platform_file(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    return parse_platform_config(std::string(bytes.begin(), bytes.end()), path);
}

TimeEstimate estimate_time(const WorkloadProfile& p, const PlatformConfig& hw) {
    hw.validate();
    TimeEstimate t;
    t.t_compute = static_cast<double>(p.flops) / hw.compute_rate;
    t.t_memory = static_cast<double>(p.total_bytes()) / hw.mem_bandwidth;
    t.t_total = std::max(t.t_compute, t.t_memory);
    t.bound = t.t_memory >= t.t_compute ? Bound::Memory : Bound::Compute;
    return t;
}

double amdahl_speedup(const AmdahlParams& a) {
    if (!(a.mem_fraction >= 0.0 && a.mem_fraction <= 1.0))
        throw DomainError("amdahl: f must lie in [0,1]");
    if (!(a.reduction > 0.0)) throw DomainError("amdahl: s must be positive");
    return 1.0 / ((1.0 - a.mem_fraction) + a.mem_fraction / a.reduction);
}

EnergyEstimate estimate_energy(const WorkloadProfile& p, const PlatformConfig& hw,
                               double seconds) {
    hw.validate();
    if (!(seconds > 0.0)) throw DomainError("energy: time must be positive");
    EnergyEstimate e;
    e.e_dynamic = hw.e_dram * static_cast<double>(p.total_bytes()) +
                  hw.e_flop * static_cast<double>(p.flops) +
                  hw.e_lut * static_cast<double>(p.lut_accesses);
    e.e_static = hw.p_static * seconds;
    e.e_total = e.e_dynamic + e.e_static;
    return e;
}

ComparisonRow compare_dense_vs_clustered(const Model& dense, const Model& clustered,
                                         const PlatformConfig& hw, std::uint64_t batch) {
    if (!(dense.graph == clustered.graph))
        throw GraphError("compare: models have different graphs");
    const WorkloadProfile pd = profile_model(dense, batch);
    const WorkloadProfile pc = profile_model(clustered, batch);
    ComparisonRow row;
    row.platform = hw.name;
    row.dense_time = estimate_time(pd, hw);
    row.clustered_time = estimate_time(pc, hw);
    row.dense_energy = estimate_energy(pd, hw, row.dense_time.t_total);
    row.clustered_energy = estimate_energy(pc, hw, row.clustered_time.t_total);
    row.speedup = row.dense_time.t_total / row.clustered_time.t_total;
    row.energy_ratio = row.clustered_energy.e_total / row.dense_energy.e_total;
    row.traffic_ratio =
        static_cast<double>(pd.param_bytes) / static_cast<double>(pc.param_bytes);
    row.mem_fraction =
        (static_cast<double>(pd.param_bytes) / hw.mem_bandwidth) / row.dense_time.t_total;
    row.ideal_amdahl = amdahl_speedup({row.mem_fraction, row.traffic_ratio});
    return row;
}

}  // namespace cwc
