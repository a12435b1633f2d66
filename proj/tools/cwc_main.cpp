// cwc: cluster transformer weights into centroid codebooks, run clustered
// inference against the dense baseline, and estimate speed/energy on modeled
// platforms.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cwc/cluster.hpp"
#include "cwc/inference.hpp"
#include "cwc/kernels.hpp"
#include "cwc/perf.hpp"
#include "cwc/serialize.hpp"
#include "cwc/sizes.hpp"

using nlohmann::json;

namespace {

// Shortest round-trip formatting so re-runs are byte-identical.
std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

// Raw blobs are little-endian on every host, like the model formats.
void append_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::vector<std::uint8_t> f32_blob_bytes(const std::vector<float>& vals) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(vals.size() * 4);
    for (float v : vals) append_u32_le(bytes, std::bit_cast<std::uint32_t>(v));
    return bytes;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
    if (!f) throw cwc::IoError("cannot open '" + out_path + "' for writing");
    f << text;
    if (!f) throw cwc::IoError("write failed on '" + out_path + "'");
}

std::string csv_join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    return line;
}

cwc::ClusteringMode parse_mode(const std::string& m) {
    if (m == "entire") return cwc::ClusteringMode::EntireModel;
    if (m == "per-layer" || m == "per_layer") return cwc::ClusteringMode::PerLayer;
    throw cwc::ConfigError("mode must be 'entire' or 'per-layer', got '" + m + "'");
}

std::vector<float> read_f32_blob(const std::string& path) {
    const std::vector<std::uint8_t> bytes = cwc::read_file(path);
    if (bytes.size() % 4 != 0)
        throw cwc::ParseError("image blob '" + path + "' is not a whole number of floats",
                              bytes.size());
    std::vector<float> vals(bytes.size() / 4);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
        vals[i] = std::bit_cast<float>(u);
        if (!std::isfinite(vals[i]))
            throw cwc::ParseError("image blob '" + path + "' holds a non-finite float", 4 * i);
    }
    return vals;
}

json size_json(const cwc::SizeBreakdown& b) {
    return json{{"param_bytes", b.param_bytes},
                {"codebook_bytes", b.codebook_bytes},
                {"total_bytes", b.total},
                {"clusterable_params", b.clusterable_params},
                {"excluded_params", b.excluded_params},
                {"clustered_params", b.clustered_params}};
}

// ---------------------------------------------------------------- gen-model

struct GenModelArgs {
    std::uint64_t seed = 0;
    std::string out;
    cwc::VitHyperParams hp;
};

int run_gen_model(const GenModelArgs& a) {
    const cwc::Model m = cwc::gen_vit_model(a.hp, a.seed);
    cwc::write_file(a.out, cwc::save_dense(m));
    const cwc::SizeBreakdown sizes = cwc::model_size_bytes(m);
    json out{{"file", a.out},
             {"seed", a.seed},
             {"tensor_count", m.storage.size()},
             {"params_total", sizes.clusterable_params + sizes.excluded_params},
             {"params_clusterable", sizes.clusterable_params},
             {"params_excluded", sizes.excluded_params},
             {"arch",
              {{"image_size", a.hp.image_size},
               {"channels", a.hp.channels},
               {"patch_size", a.hp.patch_size},
               {"dim", a.hp.dim},
               {"depth", a.hp.depth},
               {"heads", a.hp.heads},
               {"mlp_ratio", a.hp.mlp_ratio},
               {"classes", a.hp.classes}}}};
    std::cout << out.dump(2) << '\n';
    return 0;
}

// ----------------------------------------------------------------- gen-data

struct GenDataArgs {
    std::uint64_t seed = 0;
    std::string out;
    std::string labels_out;
    std::size_t count = 0, image = 16, channels = 1, classes = 0;
};

int run_gen_data(const GenDataArgs& a) {
    if (!a.labels_out.empty() && a.classes == 0)
        throw cwc::ConfigError("--labels-out needs --classes");
    const cwc::SyntheticDataset ds =
        cwc::gen_dataset(a.seed, a.count, a.image, a.channels, a.classes);
    const std::vector<std::uint8_t> bytes = f32_blob_bytes(ds.images.data());
    cwc::write_file(a.out, bytes);
    if (!a.labels_out.empty()) {
        std::vector<std::uint8_t> lb;
        lb.reserve(ds.labels.size() * 4);
        for (std::uint32_t l : ds.labels) append_u32_le(lb, l);
        cwc::write_file(a.labels_out, lb);
    }
    json out{{"file", a.out},
             {"count", a.count},
             {"image_size", a.image},
             {"channels", a.channels},
             {"bytes", bytes.size()}};
    if (!a.labels_out.empty()) out["labels_file"] = a.labels_out;
    std::cout << out.dump(2) << '\n';
    return 0;
}

// ------------------------------------------------------------------ cluster

struct ClusterArgs {
    std::string in, out, report_path, mode = "entire", format = "json";
    cwc::ClusteringConfig cfg;
};

int run_cluster(const ClusterArgs& a) {
    cwc::ClusteringConfig cfg = a.cfg;
    cfg.mode = parse_mode(a.mode);
    const cwc::Model dense = cwc::load_model_file(a.in);
    if (!dense.all_dense()) throw cwc::ConfigError("input '" + a.in + "' is already clustered");
    cwc::ClusteredModelResult res = cwc::cluster_model(dense, cfg);
    cwc::write_file(a.out, cwc::save_clustered(res.model));

    const cwc::SizeBreakdown db = cwc::model_size_bytes(dense);
    const cwc::SizeBreakdown cb = cwc::model_size_bytes(res.model);
    const double ratio = cwc::compression_ratio(db.total, cb.total);
    // Ratio over clusterable payload only, excluded tensors removed from
    // both sides; approaches 4x as the codebook share vanishes.
    const double clusterable_ratio =
        cwc::compression_ratio(4 * cb.clusterable_params,
                               cb.clustered_params + cb.codebook_bytes);
    std::size_t codebooks = res.model.shared_codebook ? 1 : 0;
    for (const auto& s : res.model.storage)
        if (!cwc::is_dense(s) && std::get<cwc::ClusteredTensor>(s).own_codebook) ++codebooks;

    if (a.format == "csv") {
        std::vector<std::string> lines{"tensor,elems,clustered,codebook_len,exact,sse"};
        for (const auto& t : res.report.tensors)
            lines.push_back(csv_join({t.name, std::to_string(t.elems),
                                      t.clustered ? "1" : "0", std::to_string(t.codebook_len),
                                      t.exact ? "1" : "0", fmt(t.sse)}));
        std::string text;
        for (const auto& l : lines) text += l + "\n";
        emit(text, a.report_path);
        return 0;
    }

    json report{{"input", a.in},
                {"output", a.out},
                {"mode", cwc::to_string(cfg.mode)},
                {"clusters", cfg.clusters},
                {"seed", cfg.seed},
                {"codebooks", codebooks},
                {"total_sse", res.report.total_sse},
                {"dense_bytes", db.total},
                {"clustered_bytes", cb.total},
                {"compression_ratio", ratio},
                {"clusterable_only_ratio", clusterable_ratio},
                {"sizes", size_json(cb)},
                {"warnings", res.report.warnings}};
    json tensors = json::array();
    for (const auto& t : res.report.tensors)
        tensors.push_back(json{{"name", t.name},
                               {"elems", t.elems},
                               {"clustered", t.clustered},
                               {"codebook_len", t.codebook_len},
                               {"exact", t.exact},
                               {"sse", t.sse}});
    report["tensors"] = tensors;
    emit(report.dump(2), a.report_path);
    return 0;
}

// ------------------------------------------------------------------ inspect

int run_inspect(const std::string& path) {
    const cwc::Model m = cwc::load_model_file(path);
    const cwc::SizeBreakdown sizes = cwc::model_size_bytes(m);
    json out{{"file", path},
             {"kind", m.graph.kind() == cwc::ModelGraph::Kind::Vit ? "vit" : "raw"},
             {"dense", m.all_dense()},
             {"mode", cwc::to_string(m.mode)},
             {"tensor_count", m.storage.size()},
             {"sizes", size_json(sizes)}};
    if (m.graph.kind() == cwc::ModelGraph::Kind::Vit) {
        const cwc::VitHyperParams& hp = m.graph.vit_params();
        out["arch"] = {{"image_size", hp.image_size}, {"channels", hp.channels},
                       {"patch_size", hp.patch_size}, {"dim", hp.dim},
                       {"depth", hp.depth},           {"heads", hp.heads},
                       {"mlp_ratio", hp.mlp_ratio},   {"classes", hp.classes}};
    }
    if (m.shared_codebook) out["shared_codebook_len"] = m.shared_codebook->size();
    json tensors = json::array();
    for (std::size_t i = 0; i < m.storage.size(); ++i) {
        const cwc::TensorSpec& spec = m.graph.tensors()[i];
        json t{{"name", spec.name},
               {"shape", spec.shape},
               {"clusterable", spec.clusterable},
               {"storage", cwc::is_dense(m.storage[i]) ? "dense" : "clustered"}};
        if (!cwc::is_dense(m.storage[i])) {
            const auto& ct = std::get<cwc::ClusteredTensor>(m.storage[i]);
            t["codebook_len"] = m.codebook_for(ct).size();
            t["own_codebook"] = ct.own_codebook.has_value();
        }
        tensors.push_back(t);
    }
    out["tensors"] = tensors;
    std::cout << out.dump(2) << '\n';
    return 0;
}

// -------------------------------------------------------------------- infer

struct InferArgs {
    std::string model, images, out, format = "csv";
    std::uint64_t data_seed = 0;
    std::size_t count = 0, image = 0, channels = 0;
};

cwc::SyntheticDataset dataset_for(const std::string& images_path, std::uint64_t data_seed,
                                  std::size_t count, std::size_t image, std::size_t channels,
                                  const cwc::VitHyperParams& hp, std::size_t classes = 0) {
    if (!images_path.empty()) {
        const std::size_t img = image ? image : hp.image_size;
        const std::size_t ch = channels ? channels : hp.channels;
        return cwc::dataset_from_blob(read_f32_blob(images_path), img, ch);
    }
    if (count == 0) throw cwc::ConfigError("need --images or --count with --data-seed");
    return cwc::gen_dataset(data_seed, count, hp.image_size, hp.channels, classes);
}

int run_infer(const InferArgs& a) {
    const cwc::Model m = cwc::load_model_file(a.model);
    const cwc::VitHyperParams& hp = m.graph.vit_params();
    const cwc::SyntheticDataset ds =
        dataset_for(a.images, a.data_seed, a.count, a.image, a.channels, hp);
    const cwc::Tensor logits = cwc::vit_forward(m, ds.images);
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    if (a.format == "json") {
        json rows = json::array();
        for (std::size_t i = 0; i < n; ++i) {
            json row{{"input", i}, {"pred", cwc::argmax_row(logits, i)}};
            json lg = json::array();
            for (std::size_t j = 0; j < c; ++j) lg.push_back(logits.at(i, j));
            row["logits"] = lg;
            rows.push_back(row);
        }
        emit(rows.dump(2), a.out);
        return 0;
    }
    std::vector<std::string> header{"input", "pred"};
    for (std::size_t j = 0; j < c; ++j) header.push_back("logit_" + std::to_string(j));
    std::string text = csv_join(header) + "\n";
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> cells{std::to_string(i), std::to_string(cwc::argmax_row(logits, i))};
        for (std::size_t j = 0; j < c; ++j) cells.push_back(fmt(logits.at(i, j)));
        text += csv_join(cells) + "\n";
    }
    emit(text, a.out);
    return 0;
}

// ----------------------------------------------------------------- fidelity

struct FidelityArgs {
    std::string base, variant, images, labels, out, format = "json";
    std::uint64_t data_seed = 0;
    std::size_t count = 0, image = 0, channels = 0;
};

int run_fidelity(const FidelityArgs& a) {
    const cwc::Model base = cwc::load_model_file(a.base);
    const cwc::Model variant = cwc::load_model_file(a.variant);
    const cwc::VitHyperParams& hp = base.graph.vit_params();
    cwc::SyntheticDataset ds =
        dataset_for(a.images, a.data_seed, a.count, a.image, a.channels, hp);
    if (!a.labels.empty()) {
        const std::vector<std::uint8_t> lb = cwc::read_file(a.labels);
        if (lb.size() % 4 != 0 || lb.size() / 4 != ds.count())
            throw cwc::ParseError("label file does not hold one u32 per input", lb.size());
        ds.labels.resize(ds.count());
        for (std::size_t i = 0; i < ds.labels.size(); ++i) {
            std::uint32_t u = 0;
            for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(lb[4 * i + b]) << (8 * b);
            ds.labels[i] = u;
        }
    }
    const cwc::Tensor base_logits = cwc::vit_forward(base, ds.images);
    const cwc::Tensor var_logits = cwc::vit_forward(variant, ds.images);
    const cwc::FidelityResult fr = cwc::fidelity_from_logits(base_logits, var_logits);
    json out{{"count", ds.count()},
             {"top1_agreement", fr.top1_agreement},
             {"mean_logit_l2", fr.mean_logit_l2}};
    if (!ds.labels.empty()) {
        const cwc::AccuracyResult ab = cwc::accuracy_from_logits(base_logits, ds.labels);
        const cwc::AccuracyResult av = cwc::accuracy_from_logits(var_logits, ds.labels);
        out["base_top1"] = ab.top1;
        out["base_top5"] = ab.top5;
        out["variant_top1"] = av.top1;
        out["variant_top5"] = av.top5;
    }
    if (a.format == "csv") {
        std::string text = "count,top1_agreement,mean_logit_l2\n" +
                           csv_join({std::to_string(ds.count()), fmt(fr.top1_agreement),
                                     fmt(fr.mean_logit_l2)}) +
                           "\n";
        emit(text, a.out);
    } else {
        emit(out.dump(2), a.out);
    }
    return 0;
}

// -------------------------------------------------------------------- sweep

struct SweepArgs {
    std::string model, out, format = "csv";
    std::vector<std::size_t> clusters{16, 32, 64, 128, 256};
    std::vector<std::string> modes{"entire", "per-layer"};
    std::vector<std::uint64_t> seeds{0};
    std::uint64_t data_seed = 0;
    std::size_t count = 512;
    std::size_t restarts = 8;
};

int run_sweep(const SweepArgs& a) {
    if (a.clusters.empty() || a.modes.empty() || a.seeds.empty())
        throw cwc::ConfigError("sweep needs non-empty clusters, modes and seeds");
    const cwc::Model dense = cwc::load_model_file(a.model);
    if (!dense.all_dense()) throw cwc::ConfigError("sweep baseline must be dense");
    const cwc::VitHyperParams& hp = dense.graph.vit_params();
    const cwc::SyntheticDataset ds =
        cwc::gen_dataset(a.data_seed, a.count, hp.image_size, hp.channels);
    const cwc::Tensor base_logits = cwc::vit_forward(dense, ds.images);
    const cwc::SizeBreakdown dense_sizes = cwc::model_size_bytes(dense);

    std::vector<std::size_t> counts = a.clusters;
    std::sort(counts.begin(), counts.end());
    std::vector<cwc::ClusteringMode> modes;
    for (const auto& ms : a.modes) modes.push_back(parse_mode(ms));
    std::sort(modes.begin(), modes.end());
    modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
    std::vector<std::uint64_t> seeds = a.seeds;
    std::sort(seeds.begin(), seeds.end());

    struct Row {
        std::size_t clusters;
        cwc::ClusteringMode mode;
        std::uint64_t seed;
        cwc::FidelityResult fid;
        double ratio;
        std::uint64_t param_bytes;
    };
    std::vector<Row> rows;
    for (std::size_t c : counts)
        for (cwc::ClusteringMode mode : modes)
            for (std::uint64_t seed : seeds) {
                cwc::ClusteringConfig cfg;
                cfg.clusters = c;
                cfg.mode = mode;
                cfg.seed = seed;
                cfg.restarts = a.restarts;
                const cwc::ClusteredModelResult res = cwc::cluster_model(dense, cfg);
                const cwc::Tensor var_logits = cwc::vit_forward(res.model, ds.images);
                const cwc::SizeBreakdown cs = cwc::model_size_bytes(res.model);
                rows.push_back({c, mode, seed,
                                cwc::fidelity_from_logits(base_logits, var_logits),
                                cwc::compression_ratio(dense_sizes.total, cs.total),
                                cs.param_bytes});
            }

    if (a.format == "json") {
        json arr = json::array();
        for (const Row& r : rows)
            arr.push_back(json{{"clusters", r.clusters},
                               {"mode", cwc::to_string(r.mode)},
                               {"seed", r.seed},
                               {"top1_agreement", r.fid.top1_agreement},
                               {"mean_logit_l2", r.fid.mean_logit_l2},
                               {"ratio", r.ratio},
                               {"param_bytes", r.param_bytes}});
        emit(arr.dump(2), a.out);
        return 0;
    }
    std::string text = "clusters,mode,seed,top1_agreement,mean_logit_l2,ratio,param_bytes\n";
    for (const Row& r : rows)
        text += csv_join({std::to_string(r.clusters), cwc::to_string(r.mode),
                          std::to_string(r.seed), fmt(r.fid.top1_agreement),
                          fmt(r.fid.mean_logit_l2), fmt(r.ratio),
                          std::to_string(r.param_bytes)}) +
                "\n";
    emit(text, a.out);
    return 0;
}

// --------------------------------------------------------------------- perf

struct PerfArgs {
    std::string dense, clustered, out, format = "csv";
    std::vector<std::string> platforms;
    std::uint64_t batch = 1;
};

int run_perf(const PerfArgs& a) {
    if (a.platforms.empty()) throw cwc::ConfigError("perf needs at least one --platform file");
    const cwc::Model dense = cwc::load_model_file(a.dense);
    const cwc::Model clustered = cwc::load_model_file(a.clustered);
    std::vector<cwc::ComparisonRow> rows;
    for (const std::string& p : a.platforms)
        rows.push_back(cwc::compare_dense_vs_clustered(dense, clustered,
                                                       cwc::load_platform_file(p), a.batch));
    auto bound_str = [](cwc::Bound b) { return b == cwc::Bound::Memory ? "memory" : "compute"; };
    if (a.format == "json") {
        json arr = json::array();
        for (const auto& r : rows)
            arr.push_back(json{{"platform", r.platform},
                               {"speedup", r.speedup},
                               {"energy_ratio", r.energy_ratio},
                               {"traffic_ratio", r.traffic_ratio},
                               {"bound_dense", bound_str(r.dense_time.bound)},
                               {"bound_clustered", bound_str(r.clustered_time.bound)},
                               {"t_dense_s", r.dense_time.t_total},
                               {"t_clustered_s", r.clustered_time.t_total},
                               {"e_dense_j", r.dense_energy.e_total},
                               {"e_clustered_j", r.clustered_energy.e_total},
                               {"mem_fraction_f", r.mem_fraction},
                               {"ideal_amdahl_speedup", r.ideal_amdahl}});
        emit(arr.dump(2), a.out);
        return 0;
    }
    std::string text =
        "platform,speedup,energy_ratio,traffic_ratio,bound_dense,bound_clustered,"
        "t_dense_s,t_clustered_s,e_dense_j,e_clustered_j,mem_fraction_f,ideal_amdahl_speedup\n";
    for (const auto& r : rows)
        text += csv_join({r.platform, fmt(r.speedup), fmt(r.energy_ratio), fmt(r.traffic_ratio),
                          bound_str(r.dense_time.bound), bound_str(r.clustered_time.bound),
                          fmt(r.dense_time.t_total), fmt(r.clustered_time.t_total),
                          fmt(r.dense_energy.e_total), fmt(r.clustered_energy.e_total),
                          fmt(r.mem_fraction), fmt(r.ideal_amdahl)}) +
                "\n";
    emit(text, a.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"clustered-weight compression and inference toolkit"};
    app.require_subcommand(1);

    GenModelArgs gm;
    CLI::App* gen_model = app.add_subcommand("gen-model", "generate a toy ViT model (TDM1)");
    gen_model->add_option("--seed", gm.seed, "weight seed");
    gen_model->add_option("--out", gm.out, "output TDM1 path")->required();
    gen_model->add_option("--image", gm.hp.image_size, "image side length");
    gen_model->add_option("--channels", gm.hp.channels, "image channels");
    gen_model->add_option("--patch", gm.hp.patch_size, "patch side length");
    gen_model->add_option("--dim", gm.hp.dim, "embedding width");
    gen_model->add_option("--depth", gm.hp.depth, "encoder blocks");
    gen_model->add_option("--heads", gm.hp.heads, "attention heads");
    gen_model->add_option("--mlp-ratio", gm.hp.mlp_ratio, "MLP width multiplier");
    gen_model->add_option("--classes", gm.hp.classes, "output classes");

    GenDataArgs gd;
    CLI::App* gen_data = app.add_subcommand("gen-data", "generate a synthetic image blob");
    gen_data->add_option("--seed", gd.seed, "dataset seed");
    gen_data->add_option("--out", gd.out, "output raw-FP32 blob path")->required();
    gen_data->add_option("--count", gd.count, "number of images")->required();
    gen_data->add_option("--image", gd.image, "image side length");
    gen_data->add_option("--channels", gd.channels, "image channels");
    gen_data->add_option("--classes", gd.classes, "label classes (0 = unlabeled)");
    gen_data->add_option("--labels-out", gd.labels_out, "output raw-u32 label path");

    ClusterArgs cl;
    CLI::App* cluster = app.add_subcommand("cluster", "cluster model weights (TDM1 -> TCM1)");
    cluster->add_option("--in", cl.in, "input TDM1 path")->required();
    cluster->add_option("--out", cl.out, "output TCM1 path")->required();
    cluster->add_option("--clusters", cl.cfg.clusters, "cluster count (2..256)");
    cluster->add_option("--mode", cl.mode, "entire | per-layer (default entire)");
    cluster->add_option("--seed", cl.cfg.seed, "clustering seed");
    cluster->add_option("--restarts", cl.cfg.restarts, "k-means++ restarts");
    cluster->add_option("--max-iters", cl.cfg.max_iters, "Lloyd iteration cap");
    cluster->add_option("--rel-tol", cl.cfg.rel_tol, "relative SSE improvement floor");
    cluster->add_option("--report", cl.report_path, "report path (default stdout)");
    cluster->add_option("--format", cl.format, "json | csv")
        ->check(CLI::IsMember({"json", "csv"}));

    std::string inspect_path;
    CLI::App* inspect = app.add_subcommand("inspect", "describe a TDM1/TCM1 file");
    inspect->add_option("--in", inspect_path, "model path")->required();

    InferArgs inf;
    CLI::App* infer = app.add_subcommand("infer", "run a forward pass, print logits");
    infer->add_option("--model", inf.model, "model path")->required();
    infer->add_option("--images", inf.images, "raw-FP32 image blob");
    infer->add_option("--image", inf.image, "blob image side length");
    infer->add_option("--channels", inf.channels, "blob image channels");
    infer->add_option("--data-seed", inf.data_seed, "synthetic dataset seed");
    infer->add_option("--count", inf.count, "synthetic dataset size");
    infer->add_option("--out", inf.out, "output path (default stdout)");
    infer->add_option("--format", inf.format, "csv | json")
        ->check(CLI::IsMember({"json", "csv"}));

    FidelityArgs fid;
    CLI::App* fidelity = app.add_subcommand("fidelity", "compare a variant against a baseline");
    fidelity->add_option("--base", fid.base, "baseline model path")->required();
    fidelity->add_option("--variant", fid.variant, "variant model path")->required();
    fidelity->add_option("--images", fid.images, "raw-FP32 image blob");
    fidelity->add_option("--image", fid.image, "blob image side length");
    fidelity->add_option("--channels", fid.channels, "blob image channels");
    fidelity->add_option("--labels", fid.labels, "raw-u32 label file (adds top-1/top-5)");
    fidelity->add_option("--data-seed", fid.data_seed, "synthetic dataset seed");
    fidelity->add_option("--count", fid.count, "synthetic dataset size");
    fidelity->add_option("--out", fid.out, "output path (default stdout)");
    fidelity->add_option("--format", fid.format, "json | csv")
        ->check(CLI::IsMember({"json", "csv"}));

    SweepArgs sw;
    CLI::App* sweep = app.add_subcommand("sweep", "fidelity across cluster counts and modes");
    sweep->add_option("--model", sw.model, "dense baseline TDM1")->required();
    sweep->add_option("--out", sw.out, "output path (default stdout)");
    sweep->add_option("--clusters", sw.clusters, "cluster counts")->delimiter(',');
    sweep->add_option("--modes", sw.modes, "clustering modes")->delimiter(',');
    sweep->add_option("--seeds", sw.seeds, "clustering seeds")->delimiter(',');
    sweep->add_option("--data-seed", sw.data_seed, "dataset seed");
    sweep->add_option("--count", sw.count, "dataset size");
    sweep->add_option("--restarts", sw.restarts, "k-means++ restarts");
    sweep->add_option("--format", sw.format, "csv | json")
        ->check(CLI::IsMember({"json", "csv"}));

    PerfArgs pf;
    CLI::App* perf = app.add_subcommand("perf", "roofline speedup and energy per platform");
    perf->add_option("--dense", pf.dense, "dense baseline model")->required();
    perf->add_option("--clustered", pf.clustered, "clustered model")->required();
    perf->add_option("--platform", pf.platforms, "platform config file (repeatable)")
        ->required();
    perf->add_option("--batch", pf.batch, "inferences per run");
    perf->add_option("--out", pf.out, "output path (default stdout)");
    perf->add_option("--format", pf.format, "csv | json")
        ->check(CLI::IsMember({"json", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }

    try {
        if (*gen_model) return run_gen_model(gm);
        if (*gen_data) return run_gen_data(gd);
        if (*cluster) return run_cluster(cl);
        if (*inspect) return run_inspect(inspect_path);
        if (*infer) return run_infer(inf);
        if (*fidelity) return run_fidelity(fid);
        if (*sweep) return run_sweep(sw);
        if (*perf) return run_perf(pf);
    } catch (const cwc::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const cwc::CorruptionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const cwc::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const cwc::GraphError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const cwc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
