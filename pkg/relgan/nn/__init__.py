from .base_layers import Activation, ConvLayer, ResidualBlock, get_activation, get_norm
from .architectures import (
    ArchConfig,
    ResnetGenerator,
    IdentityGenerator,
    PatchDiscriminator,
    build_generator,
    build_discriminator,
    init_parameters,
    check_arch,
)
from .quartet import GeneratorQuartet, build_quartet, GENERATOR_NAMES, DISCRIMINATOR_NAMES, NETWORK_NAMES
from .optim import AdamState, adam_step, network_grads
