document.title = "Tracker";
