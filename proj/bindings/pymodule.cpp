#include <pybind11/pybind11.h>

PYBIND11_MODULE(_crowdlens, m) { m.doc() = "people analytics engine"; }
