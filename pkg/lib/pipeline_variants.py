from abc import ABCMeta, abstractmethod


class VariantRegistry:
	_variants = {}

	@classmethod
	def register_variant(cls, variant_cls):
		cls._variants[variant_cls.name()] = variant_cls

	@classmethod
	def get_variant(cls, name) -> "VariantBase":
		return cls._variants.get(name)

	@classmethod
	def all_variants(cls) -> dict[str, "VariantBase"]:
		return dict(cls._variants)

	@classmethod
	def names(cls) -> list[str]:
		return list(cls._variants)


class VariantMeta(ABCMeta):
	def __init__(cls, name, bases, namespace):
		super().__init__(name, bases, namespace)
		# only concrete arms register, VariantBase and unnamed helpers stay hidden
		if name != "VariantBase" and getattr(cls, "name")() is not None:
			VariantRegistry.register_variant(cls)


class UnknownVariant(ValueError):
	pass


class VariantBase(metaclass=VariantMeta):
	scan_stabilization = False
	leg_odometry = False

	@classmethod
	@abstractmethod
	def name(cls) -> str | None:
		"""unique arm name as used on the command line"""
		...

	@classmethod
	@abstractmethod
	def description(cls) -> str:
		...

	@classmethod
	def stages(cls) -> tuple[str, ...]:
		"""pipeline stages this arm runs, in execution order"""
		stages = ["sim", "vio"]
		if cls.leg_odometry:
			stages += ["contact", "legodom", "fusion"]
		stages.append("scanstab" if cls.scan_stabilization else "center_row_scan")
		stages.append("slam2d")
		if cls.leg_odometry:
			stages.append("velocity_factors")
		return tuple(stages)


class Baseline(VariantBase):
	@classmethod
	def name(cls):
		return "B"

	@classmethod
	def description(cls):
		return "visual odometry and the raw center-row scan"


class BaselineScanStabilization(VariantBase):
	scan_stabilization = True

	@classmethod
	def name(cls):
		return "B+SS"

	@classmethod
	def description(cls):
		return "baseline with attitude-compensated scans"


class BaselineLegOdometry(VariantBase):
	leg_odometry = True

	@classmethod
	def name(cls):
		return "B+LO"

	@classmethod
	def description(cls):
		return "baseline with leg odometry fallback and velocity factors"


class Ours(VariantBase):
	scan_stabilization = True
	leg_odometry = True

	@classmethod
	def name(cls):
		return "Ours"

	@classmethod
	def description(cls):
		return "stabilized scans, leg odometry fallback and velocity factors"


def resolve_variant(name: str) -> type[VariantBase]:
	variant = VariantRegistry.get_variant(name)
	if variant is None:
		raise UnknownVariant(f"unknown variant '{name}', expected one of {', '.join(VariantRegistry.names())}")
	return variant


def describe_variants() -> str:
	"""'name: description' of every registered arm, for help texts"""
	return "; ".join(f"{name}: {variant.description()}" for name, variant in VariantRegistry.all_variants().items())
