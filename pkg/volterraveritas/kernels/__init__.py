from volterraveritas.kernels.memory_kernel import KernelFamily, MemoryKernel, parse_kernel_spec, \
    cauchy_riemann_residual, TAIL_CUTOFF
