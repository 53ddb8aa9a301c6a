# User interface package
