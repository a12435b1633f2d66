#include "cwc/sizes.hpp"

#include "cwc/errors.hpp"

namespace cwc {

SizeBreakdown model_size_bytes(const Model& m) {
    SizeBreakdown b;
    for (std::size_t i = 0; i < m.storage.size(); ++i) {
        const TensorSpec& spec = m.graph.tensors()[i];
        const std::uint64_t n = Tensor::checked_elem_count(spec.shape);
        if (spec.clusterable)
            b.clusterable_params += n;
        else
            b.excluded_params += n;
        if (is_dense(m.storage[i])) {
            b.param_bytes += 4 * n;
        } else {
            const ClusteredTensor& ct = std::get<ClusteredTensor>(m.storage[i]);
            b.param_bytes += n;  // one u8 index per scalar
            b.clustered_params += n;
            if (ct.own_codebook) b.codebook_bytes += ct.own_codebook->byte_size();
        }
    }
    if (m.shared_codebook) b.codebook_bytes += m.shared_codebook->byte_size();
    b.total = b.param_bytes + b.codebook_bytes;
    return b;
}

std::uint64_t dense_size_bytes(std::uint64_t total_params) { return 4 * total_params; }

std::uint64_t clustered_size_bytes(std::uint64_t clustered_params, std::uint64_t codebooks,
                                   std::uint64_t clusters, std::uint64_t excluded_params) {
    return clustered_params + 4 * codebooks * clusters + 4 * excluded_params;
}

double compression_ratio(std::uint64_t dense_total, std::uint64_t clustered_total) {
    if (dense_total == 0 || clustered_total == 0)
        throw DomainError("compression_ratio: sizes must be positive");
    return static_cast<double>(dense_total) / static_cast<double>(clustered_total);
}

}  // namespace cwc
