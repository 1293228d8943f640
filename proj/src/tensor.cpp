#include "lowformer/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace lowformer {

std::string Shape::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

template <typename T>
bool TensorT<T>::all_finite() const {
  for (T v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
void require_finite(const TensorT<T>& t, const char* where) {
  if (!t.all_finite()) throw std::domain_error(std::string("non-finite value produced by ") + where);
}

template class TensorT<float>;
template class TensorT<double>;
template void require_finite(const TensorT<float>&, const char*);
template void require_finite(const TensorT<double>&, const char*);

}  // namespace lowformer
