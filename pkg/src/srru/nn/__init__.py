from srru.nn.layers import (
    ConvParams,
    bilinear_kernel,
    channel_scale,
    channel_scale_backward,
    concat_channels,
    concat_channels_backward,
    conv2d,
    conv2d_backward,
    conv_params,
    conv_transpose2d,
    conv_transpose2d_backward,
    conv_transpose2d_output_shape,
    global_avg_pool,
    global_avg_pool_backward,
    he_init,
    lrelu,
    lrelu_backward,
    sigmoid,
    sigmoid_backward,
    transposed_params,
)

__all__ = [
    "ConvParams",
    "bilinear_kernel",
    "channel_scale",
    "channel_scale_backward",
    "concat_channels",
    "concat_channels_backward",
    "conv2d",
    "conv2d_backward",
    "conv_params",
    "conv_transpose2d",
    "conv_transpose2d_backward",
    "conv_transpose2d_output_shape",
    "global_avg_pool",
    "global_avg_pool_backward",
    "he_init",
    "lrelu",
    "lrelu_backward",
    "sigmoid",
    "sigmoid_backward",
    "transposed_params",
]
