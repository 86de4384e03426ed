#include "dpmcpm/kernels.hpp"

#include "dpmcpm/core.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace dpmcpm::kernels
{

namespace
{

const KernelSet* lookup(Isa isa)
{
    switch (isa) {
    case Isa::scalar:
        return &scalar_kernels();
    case Isa::avx2:
        return avx2_kernels();
    case Isa::neon:
        return neon_kernels();
    }
    return nullptr;
}

const KernelSet* select_default()
{
    if (const char* forced = std::getenv("DPMCPM_ISA")) {
        const std::string name(forced);
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
            if (name == isa_name(isa)) {
                if (const KernelSet* set = lookup(isa)) {
                    return set;
                }
            }
        }
    }
    if (const KernelSet* set = avx2_kernels()) {
        return set;
    }
    if (const KernelSet* set = neon_kernels()) {
        return set;
    }
    return &scalar_kernels();
}

std::atomic<const KernelSet*>& current()
{
    static std::atomic<const KernelSet*> set{select_default()};
    return set;
}

} // namespace

std::string_view isa_name(Isa isa)
{
    switch (isa) {
    case Isa::scalar:
        return "scalar";
    case Isa::avx2:
        return "avx2";
    case Isa::neon:
        return "neon";
    }
    return "unknown";
}

const KernelSet& active()
{
    return *current().load(std::memory_order_relaxed);
}

bool available(Isa isa)
{
    return lookup(isa) != nullptr;
}

void set_active(Isa isa)
{
    const KernelSet* set = lookup(isa);
    if (set == nullptr) {
        throw ContractError("kernel set " + std::string(isa_name(isa)) + " is not available");
    }
    current().store(set, std::memory_order_relaxed);
}

} // namespace dpmcpm::kernels
