from volterraveritas.utils.utils import *
from volterraveritas.utils.errors import *
