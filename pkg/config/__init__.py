# Config module init
from config.settings import *
