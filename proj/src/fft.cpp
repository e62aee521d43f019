#include "paracalc/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "paracalc/errors.hpp"

namespace paracalc::fft {

namespace {

struct PlanCache {
    std::mutex mu;
    std::map<std::tuple<int, int, int>, fftw_plan> plans;

    fftw_plan get(int dim, int n, int sign)
    {
        std::lock_guard<std::mutex> lock(mu);
        auto key = std::make_tuple(dim, n, sign);
        auto it = plans.find(key);
        if (it != plans.end()) return it->second;
        std::size_t total = dim == 1 ? std::size_t(n) : std::size_t(n) * n;
        fftw_complex* in = fftw_alloc_complex(total);
        fftw_complex* out = fftw_alloc_complex(total);
        int dims[2] = {n, n};
        fftw_plan p = fftw_plan_dft(dim, dims, in, out, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(in);
        fftw_free(out);
        require(p != nullptr, ErrorKind::internal, "fftw plan creation failed");
        plans.emplace(key, p);
        return p;
    }
};

PlanCache& cache()
{
    static PlanCache c;
    return c;
}

}  // namespace

void transform(std::vector<std::complex<double>>& data, int dim, int n, int sign)
{
    fftw_plan p = cache().get(dim, n, sign);
    std::vector<std::complex<double>> out(data.size());
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    data.swap(out);
}

void forward_normalized(std::vector<std::complex<double>>& data, int dim, int n)
{
    transform(data, dim, n, -1);
    double scale = 1.0 / double(data.size());
    for (auto& c : data) c *= scale;
}

}  // namespace paracalc::fft
