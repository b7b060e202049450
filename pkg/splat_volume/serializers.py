"""Schemas for the config, camera and metric files of splat_volume."""
from rest_framework import serializers

from splat_volume.exceptions import ConfigError
from splat_volume.sh import SUPPORTED_ORDERS


class ModelConfigSerializer(serializers.Serializer):  # pylint: disable=abstract-method
    """Network shape of a reconstruction model."""

    M = serializers.IntegerField(min_value=1)
    patch = serializers.IntegerField(min_value=1)
    O = serializers.IntegerField(min_value=1)  # noqa: E741
    C = serializers.IntegerField(min_value=1)
    B = serializers.IntegerField(min_value=1)
    W_f = serializers.IntegerField(min_value=1)
    W_e = serializers.IntegerField(min_value=1)
    G = serializers.IntegerField(min_value=1)
    layers = serializers.IntegerField(min_value=1)
    heads = serializers.IntegerField(min_value=1)
    mlp_ratio = serializers.IntegerField(min_value=1)
    K = serializers.IntegerField(min_value=1)
    r = serializers.FloatField(min_value=0.0)
    sh_order = serializers.ChoiceField(choices=SUPPORTED_ORDERS)
    image_size = serializers.IntegerField(min_value=1)
    encoder_blocks = serializers.IntegerField(min_value=0)
    decoder_hidden = serializers.IntegerField(min_value=1)

    def validate(self, attrs):
        errors = {}
        for name in ("W_f", "W_e"):
            if attrs[name] % attrs["G"]:
                errors[name] = [f"must be divisible by G={attrs['G']}"]
        for name in ("O", "C", "B"):
            if attrs[name] % attrs["heads"]:
                errors[name] = [f"must be divisible by heads={attrs['heads']}"]
        if attrs["image_size"] % attrs["patch"]:
            errors["image_size"] = [f"must be divisible by patch={attrs['patch']}"]
        if errors:
            raise serializers.ValidationError(errors)
        return attrs


class TrainConfigSerializer(serializers.Serializer):  # pylint: disable=abstract-method
    """Optimisation schedule of a training run."""

    lr = serializers.FloatField(min_value=0.0)
    lr_min = serializers.FloatField(min_value=0.0)
    epochs = serializers.IntegerField(min_value=1)
    steps_per_epoch = serializers.IntegerField(min_value=1)
    batch_size = serializers.IntegerField(min_value=1)
    grad_accumulation = serializers.IntegerField(min_value=1)
    reg_enabled = serializers.BooleanField()
    reg_start_epoch = serializers.IntegerField(min_value=0)
    period_epochs = serializers.IntegerField(min_value=1, allow_null=True)
    weight_decay = serializers.FloatField(min_value=0.0)
    betas = serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=1.0), min_length=2,
                                  max_length=2)
    seed = serializers.IntegerField(min_value=0)
    validate_every = serializers.IntegerField(min_value=1)
    precision = serializers.ChoiceField(choices=["float32", "float64"])

    def validate_lr(self, value):
        if value <= 0:
            raise serializers.ValidationError("must be positive")
        return value


class CameraSerializer(serializers.Serializer):  # pylint: disable=abstract-method
    K = serializers.ListField(child=serializers.FloatField(), min_length=9, max_length=9)
    w2c = serializers.ListField(child=serializers.FloatField(), min_length=16, max_length=16)
    width = serializers.IntegerField(min_value=1)
    height = serializers.IntegerField(min_value=1)
    image_path = serializers.CharField()
    depth_path = serializers.CharField(required=False)


class MetricsReportSerializer(serializers.Serializer):  # pylint: disable=abstract-method
    """One evaluation record; aggregated reports may carry nulls."""

    psnr = serializers.FloatField(allow_null=True)
    ssim = serializers.FloatField(allow_null=True)
    depth_abs = serializers.FloatField(allow_null=True)
    acc_005 = serializers.FloatField(allow_null=True)
    acc_01 = serializers.FloatField(allow_null=True)
    acc_02 = serializers.FloatField(allow_null=True)


def validated(serializer_class, data, source="config"):
    """
    Validate ``data`` and return the cleaned dict, or raise ConfigError listing the field errors.
    """
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        details = "; ".join(f"{field}: {', '.join(str(e) for e in errors)}"
                            for field, errors in sorted(serializer.errors.items()))
        raise ConfigError(f"Invalid {source}: {details}")
    return dict(serializer.validated_data)
